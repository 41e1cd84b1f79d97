#include "vecfl/mobility/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vecfl {

namespace {

constexpr double kGeomTol = 1e-6;
// Trajectory integration gives up after this horizon; a vehicle that never
// leaves a disc (static, or a network fully inside coverage) reports it as
// its dwell time.
constexpr double kDwellCap = 1e6;

double dist(Point a, Point b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

bool same_point(Point a, Point b) {
    return dist(a, b) <= kGeomTol;
}

Point normalize(Point p) {
    double len = std::hypot(p.x, p.y);
    if (len <= 0) return {0, 0};
    return {p.x / len, p.y / len};
}

bool point_on_segment(Point p, Point a, Point b, double tol) {
    double len = dist(a, b);
    if (len <= kGeomTol) return same_point(p, a);
    double ux = (b.x - a.x) / len;
    double uy = (b.y - a.y) / len;
    double t = (p.x - a.x) * ux + (p.y - a.y) * uy;
    if (t < -tol || t > len + tol) return false;
    double px = a.x + t * ux;
    double py = a.y + t * uy;
    return dist(p, {px, py}) <= tol;
}

}  // namespace

double v2e_rate(Point vehicle_pos, const EdgeServerSpec& es, const ChannelParams& ch) {
    double d = dist(vehicle_pos, es.position);
    if (d < 1.0) d = 1.0;  // clamp so the SNR stays finite at the mast
    double snr = ch.snr_ref / std::pow(d, ch.pathloss_exponent);
    return ch.bandwidth * std::log2(1.0 + snr);
}

RoadNetwork::RoadNetwork(const RoadNetworkConfig& cfg) {
    const auto& segs = cfg.segments;
    // Split points per segment: endpoints, crossings, and any other
    // segment's endpoint that touches this one.
    std::vector<std::vector<Point>> splits(segs.size());
    for (std::size_t i = 0; i < segs.size(); ++i) {
        splits[i].push_back(segs[i].a);
        splits[i].push_back(segs[i].b);
    }
    for (std::size_t i = 0; i < segs.size(); ++i) {
        for (std::size_t l = 0; l < segs.size(); ++l) {
            if (i == l) continue;
            bool hi = std::abs(segs[i].a.y - segs[i].b.y) <= kGeomTol;
            bool hl = std::abs(segs[l].a.y - segs[l].b.y) <= kGeomTol;
            if (hi != hl) {
                const RoadSegment& h = hi ? segs[i] : segs[l];
                const RoadSegment& v = hi ? segs[l] : segs[i];
                Point x{v.a.x, h.a.y};
                if (point_on_segment(x, h.a, h.b, kGeomTol) &&
                    point_on_segment(x, v.a, v.b, kGeomTol))
                    splits[i].push_back(x);
            }
            // Touching endpoints (T junctions on parallel chains).
            for (Point e : {segs[l].a, segs[l].b})
                if (point_on_segment(e, segs[i].a, segs[i].b, kGeomTol)) splits[i].push_back(e);
        }
    }

    auto intern = [this](Point p) -> int {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (same_point(nodes_[i], p)) return static_cast<int>(i);
        nodes_.push_back(p);
        return static_cast<int>(nodes_.size()) - 1;
    };

    std::set<std::pair<int, int>> seen;
    std::vector<std::pair<int, int>> raw_edges;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        auto& pts = splits[i];
        Point a = segs[i].a, b = segs[i].b;
        double len = dist(a, b);
        if (len <= kGeomTol) continue;
        Point u = normalize({b.x - a.x, b.y - a.y});
        std::sort(pts.begin(), pts.end(), [&](Point p, Point q) {
            return (p.x - a.x) * u.x + (p.y - a.y) * u.y < (q.x - a.x) * u.x + (q.y - a.y) * u.y;
        });
        for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
            if (same_point(pts[s], pts[s + 1])) continue;
            int na = intern(pts[s]);
            int nb = intern(pts[s + 1]);
            auto key = std::minmax(na, nb);
            if (seen.insert({key.first, key.second}).second) raw_edges.push_back({na, nb});
        }
    }

    edges_.assign(nodes_.size(), {});
    for (auto [na, nb] : raw_edges) {
        Point pa = nodes_[na], pb = nodes_[nb];
        double len = dist(pa, pb);
        edges_[na].push_back({pa, normalize({pb.x - pa.x, pb.y - pa.y}), len, nb});
        edges_[nb].push_back({pb, normalize({pa.x - pb.x, pa.y - pb.y}), len, na});
    }
    // Stable choice indexing: sort outgoing edges by direction.
    for (auto& out : edges_) {
        std::sort(out.begin(), out.end(), [](const Step& a, const Step& b) {
            if (a.dir.x != b.dir.x) return a.dir.x < b.dir.x;
            return a.dir.y < b.dir.y;
        });
    }
}

std::vector<Point> RoadNetwork::intersections() const {
    std::vector<Point> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (edges_[i].size() >= 3) out.push_back(nodes_[i]);
    return out;
}

bool RoadNetwork::on_road(Point p, double tol) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        for (const Step& s : edges_[i]) {
            Point end{s.from.x + s.dir.x * s.length, s.from.y + s.dir.y * s.length};
            if (point_on_segment(p, s.from, end, tol)) return true;
        }
    return false;
}

int RoadNetwork::node_at(Point p, double tol) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (dist(nodes_[i], p) <= tol) return static_cast<int>(i);
    return -1;
}

std::vector<int> RoadNetwork::choices_from(int node, Point arriving_dir) const {
    std::vector<int> out;
    const auto& steps = edges_.at(node);
    for (std::size_t c = 0; c < steps.size(); ++c) {
        // Exclude the reverse edge (U-turn) unless it is the only option.
        double dot = steps[c].dir.x * -arriving_dir.x + steps[c].dir.y * -arriving_dir.y;
        if (dot > 1.0 - 1e-9) continue;
        out.push_back(static_cast<int>(c));
    }
    if (out.empty() && !steps.empty()) {
        for (std::size_t c = 0; c < steps.size(); ++c) out.push_back(static_cast<int>(c));
    }
    return out;
}

RoadNetwork::Location RoadNetwork::locate(Point p, Point heading) const {
    Location loc;
    loc.node = node_at(p);
    if (loc.node >= 0) return loc;
    Point h = normalize(heading);
    int fallback_node = -1, fallback_choice = -1;
    double fallback_off = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        for (std::size_t c = 0; c < edges_[i].size(); ++c) {
            const Step& s = edges_[i][c];
            Point end{s.from.x + s.dir.x * s.length, s.from.y + s.dir.y * s.length};
            if (!point_on_segment(p, s.from, end, 0.5)) continue;
            double off = (p.x - s.from.x) * s.dir.x + (p.y - s.from.y) * s.dir.y;
            double align = s.dir.x * h.x + s.dir.y * h.y;
            if (align > 0.5 || (h.x == 0 && h.y == 0)) {
                loc.edge_node = static_cast<int>(i);
                loc.edge_choice = static_cast<int>(c);
                loc.offset = off;
                return loc;
            }
            if (fallback_node < 0) {
                fallback_node = static_cast<int>(i);
                fallback_choice = static_cast<int>(c);
                fallback_off = off;
            }
        }
    }
    if (fallback_node >= 0) {
        loc.edge_node = fallback_node;
        loc.edge_choice = fallback_choice;
        loc.offset = fallback_off;
        return loc;
    }
    throw std::runtime_error("position is not on the road network");
}

MobilityModel::MobilityModel(const SystemConfig& cfg, std::uint64_t seed)
    : cfg_(&cfg), net_(cfg.roads), seed_(seed), tracks_(cfg.vehicles.size()) {
    for (std::size_t n = 0; n < cfg.vehicles.size(); ++n) {
        const VehicleSpec& v = cfg.vehicles[n];
        Track& tr = tracks_[n];
        tr.turns = SeededRng::derive(seed_, {stream::kMobility, static_cast<std::uint64_t>(n)});
        Waypoint w0;
        w0.t = 0;
        w0.pos = v.initial_position;
        w0.speed = v.speed;
        if (v.speed <= 0) {
            w0.dir = {0, 0};
            tr.points.push_back(w0);
            continue;
        }
        auto loc = net_.locate(v.initial_position, v.heading);
        if (loc.node >= 0) {
            // Starting on a node: leave along the edge best aligned with the
            // configured heading (lowest choice index on ties).
            const auto& steps = net_.edges_at(loc.node);
            Point h = normalize(v.heading);
            int best = 0;
            double best_align = -2;
            for (std::size_t c = 0; c < steps.size(); ++c) {
                double a = steps[c].dir.x * h.x + steps[c].dir.y * h.y;
                if (a > best_align + 1e-12) {
                    best_align = a;
                    best = static_cast<int>(c);
                }
            }
            w0.dir = steps[best].dir;
        } else {
            w0.dir = net_.edge(loc.edge_node, loc.edge_choice).dir;
        }
        tr.points.push_back(w0);
    }
}

void MobilityModel::extend_track(VehicleId n, double until) const {
    Track& tr = tracks_.at(n);
    const VehicleSpec& v = cfg_->vehicles.at(n);
    if (v.speed <= 0) return;
    while (tr.points.back().t < until) {
        const Waypoint& last = tr.points.back();
        auto loc = net_.locate(last.pos, last.dir);
        double remaining;
        int next_node;
        if (loc.node >= 0) {
            // Sitting on a node and already holding a departure direction.
            const auto& steps = net_.edges_at(loc.node);
            int chosen = -1;
            for (std::size_t c = 0; c < steps.size(); ++c) {
                double a = steps[c].dir.x * last.dir.x + steps[c].dir.y * last.dir.y;
                if (a > 1.0 - 1e-9) chosen = static_cast<int>(c);
            }
            if (chosen < 0) chosen = 0;
            const auto& s = net_.edge(loc.node, chosen);
            remaining = s.length;
            next_node = s.next_node;
        } else {
            const auto& s = net_.edge(loc.edge_node, loc.edge_choice);
            remaining = s.length - loc.offset;
            next_node = s.next_node;
        }
        Waypoint w;
        w.t = last.t + remaining / v.speed;
        w.pos = net_.nodes()[next_node];
        w.speed = v.speed;
        // Pick the departure direction at the node; one seeded draw per
        // genuine choice point, in arrival order.
        auto choices = net_.choices_from(next_node, last.dir);
        int pick;
        if (choices.empty()) {
            w.dir = {-last.dir.x, -last.dir.y};
            tr.points.push_back(w);
            continue;
        } else if (choices.size() == 1) {
            pick = choices[0];
        } else {
            pick = choices[tr.turns.uniform_int(choices.size())];
        }
        w.dir = net_.edge(next_node, pick).dir;
        tr.points.push_back(w);
    }
}

Point MobilityModel::position_at(VehicleId n, double t) const {
    const VehicleSpec& v = cfg_->vehicles.at(n);
    if (v.speed <= 0 || t <= 0) return v.initial_position;
    extend_track(n, t);
    const auto& pts = tracks_.at(n).points;
    // Last waypoint with wp.t <= t.
    std::size_t lo = 0, hi = pts.size();
    while (lo + 1 < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (pts[mid].t <= t)
            lo = mid;
        else
            hi = mid;
    }
    const Waypoint& w = pts[lo];
    double s = (t - w.t) * v.speed;
    return {w.pos.x + w.dir.x * s, w.pos.y + w.dir.y * s};
}

double MobilityModel::dwell_time(VehicleId n, const EdgeServerSpec& es, double t0) const {
    Point p0 = position_at(n, t0);
    double r0 = dist(p0, es.position);
    if (r0 > es.coverage_radius + kGeomTol) throw NotCovered(n, es.id);
    const VehicleSpec& v = cfg_->vehicles.at(n);
    if (v.speed <= 0) return kDwellCap;

    double t = t0;
    Point p = p0;
    while (t - t0 < kDwellCap) {
        extend_track(n, t + kGeomTol);
        const auto& pts = tracks_.at(n).points;
        std::size_t lo = 0, hi = pts.size();
        while (lo + 1 < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (pts[mid].t <= t + 1e-12)
                lo = mid;
            else
                hi = mid;
        }
        // Linear piece from (t, p) heading pts[lo].dir until the next
        // waypoint (or indefinitely on the last known piece).
        Point d = pts[lo].dir;
        double piece_end;
        if (lo + 1 < pts.size()) {
            piece_end = pts[lo + 1].t;
        } else {
            extend_track(n, t + 3600.0);
            continue;
        }
        double dur = piece_end - t;
        if (dur <= 0) {
            t = piece_end;
            p = position_at(n, t);
            continue;
        }
        // |p + s*speed*d - c|^2 = R^2 over s in [0, dur].
        double cx = p.x - es.position.x;
        double cy = p.y - es.position.y;
        double a = v.speed * v.speed;
        double b = 2.0 * v.speed * (cx * d.x + cy * d.y);
        double c0 = cx * cx + cy * cy - es.coverage_radius * es.coverage_radius;
        double disc = b * b - 4 * a * c0;
        if (disc >= 0) {
            double s_exit = (-b + std::sqrt(disc)) / (2 * a);
            if (s_exit >= 0 && s_exit <= dur + 1e-12) {
                return (t + s_exit) - t0;
            }
        }
        t = piece_end;
        p = position_at(n, t);
    }
    return kDwellCap;
}

EsId MobilityModel::covering_es(VehicleId n, double t) const {
    Point p = position_at(n, t);
    EsId best = -1;
    double best_d = 0;
    for (const auto& es : cfg_->edge_servers) {
        double d = dist(p, es.position);
        if (d <= es.coverage_radius + kGeomTol && (best < 0 || d < best_d)) {
            best = es.id;
            best_d = d;
        }
    }
    return best;
}

}  // namespace vecfl
