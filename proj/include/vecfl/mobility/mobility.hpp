#ifndef VECFL_MOBILITY_MOBILITY_HPP_
#define VECFL_MOBILITY_MOBILITY_HPP_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "vecfl/core/rng.hpp"
#include "vecfl/core/types.hpp"

namespace vecfl {

class NotCovered : public std::runtime_error {
public:
    NotCovered(VehicleId n, EsId m)
        : std::runtime_error("vehicle " + std::to_string(n + 1) +
                             " outside coverage of ES " + std::to_string(m + 1)) {}
};

// Time-varying V2E data rate: log-distance Shannon form
//   rate = bandwidth * log2(1 + snr_ref / d^pathloss_exponent)
// with d clamped at 1 m so the rate stays finite at the mast.
double v2e_rate(Point vehicle_pos, const EdgeServerSpec& es, const ChannelParams& ch);

// Road graph built from axis-aligned segments. Nodes are segment endpoints
// plus every geometric crossing; edges are the sub-segments between
// consecutive nodes along a road.
class RoadNetwork {
public:
    explicit RoadNetwork(const RoadNetworkConfig& cfg);

    const std::vector<Point>& nodes() const { return nodes_; }
    // Nodes with degree >= 3, i.e. genuine crossings.
    std::vector<Point> intersections() const;

    bool on_road(Point p, double tol = 0.5) const;

    struct Step {
        Point from;
        Point dir;        // unit vector
        double length;    // meters to the next node
        int next_node;    // index into nodes()
    };
    // The directed edge leaving `node` in direction `dir` (must exist).
    // Choices at a node exclude the reverse direction unless it is the only
    // option (dead ends turn back).
    std::vector<int> choices_from(int node, Point arriving_dir) const;
    const Step& edge(int node, int choice) const { return edges_.at(node).at(choice); }
    const std::vector<Step>& edges_at(int node) const { return edges_.at(node); }

    // Locates p on the network: nearest node if within tol, else the edge
    // containing it. Throws if p is off-road.
    struct Location {
        int node = -1;        // >= 0 when sitting on a node
        int edge_node = -1;   // otherwise: edge origin node index
        int edge_choice = -1; // and which outgoing edge
        double offset = 0.0;  // meters from the edge origin
    };
    Location locate(Point p, Point heading) const;

private:
    std::vector<Point> nodes_;
    std::vector<std::vector<Step>> edges_;  // per node, outgoing
    int node_at(Point p, double tol = 0.5) const;
};

// Deterministic trajectories for all vehicles. Turns at intersections are
// uniform over the non-reverse choices, drawn from a per-vehicle stream, so
// the i-th crossing of a vehicle consumes the i-th draw no matter in which
// order queries arrive.
class MobilityModel {
public:
    MobilityModel(const SystemConfig& cfg, std::uint64_t seed);

    Point position_at(VehicleId n, double t) const;

    // First time >= t0 at which the vehicle leaves the coverage disc of es,
    // minus t0. Requires the vehicle inside coverage at t0.
    double dwell_time(VehicleId n, const EdgeServerSpec& es, double t0) const;

    // Edge server covering the vehicle at time t: the nearest one whose disc
    // contains the position, or -1. Ties go to the lower id.
    EsId covering_es(VehicleId n, double t) const;

    const RoadNetwork& network() const { return net_; }

private:
    struct Waypoint {
        double t;       // time of reaching `pos`
        Point pos;
        Point dir;      // unit direction leaving pos
        double speed;
    };
    struct Track {
        std::vector<Waypoint> points;
        SeededRng turns;
        Track() : turns(0) {}
    };

    void extend_track(VehicleId n, double until) const;

    const SystemConfig* cfg_;
    RoadNetwork net_;
    std::uint64_t seed_;
    mutable std::vector<Track> tracks_;
};

}  // namespace vecfl

#endif  // VECFL_MOBILITY_MOBILITY_HPP_
