#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <utility>

#include "sbd/detect.hpp"
#include "sbd/error.hpp"

namespace sbd {

namespace {

using Real = long double;

struct P {
    Real x, y;
};

Real orient(const P& a, const P& b, const P& c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

// Positive when d lies inside the circumcircle of counter-clockwise (a, b, c).
Real incircle(const P& a, const P& b, const P& c, const P& d) {
    const Real adx = a.x - d.x, ady = a.y - d.y;
    const Real bdx = b.x - d.x, bdy = b.y - d.y;
    const Real cdx = c.x - d.x, cdy = c.y - d.y;
    const Real ad = adx * adx + ady * ady;
    const Real bd = bdx * bdx + bdy * bdy;
    const Real cd = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

struct Tri {
    std::size_t v[3];
    long nb[3];  // neighbour across edge (v[k], v[k+1]), -1 for none
    bool alive = true;
};

std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int order) {
    std::uint64_t d = 0;
    for (std::uint32_t s = 1u << (order - 1); s > 0; s >>= 1) {
        const std::uint32_t rx = (x & s) ? 1 : 0;
        const std::uint32_t ry = (y & s) ? 1 : 0;
        d += static_cast<std::uint64_t>(s) * s * ((3 * rx) ^ ry);
        if (ry == 0) {
            if (rx == 1) {
                x = s - 1 - (x & (s - 1)) + (x & ~(s - 1));
                y = s - 1 - (y & (s - 1)) + (y & ~(s - 1));
                x &= (s << 1) - 1;
                y &= (s << 1) - 1;
            }
            std::swap(x, y);
        }
    }
    return d;
}

class Triangulator {
public:
    explicit Triangulator(std::vector<P> pts) : pts_(std::move(pts)) {}

    void init_super(std::size_t a, std::size_t b, std::size_t c) { tris_.push_back({{a, b, c}, {-1, -1, -1}}); }

    void insert(std::size_t i) {
        const P& p = pts_[i];
        const long seed = locate(p);
        if (seed < 0 || incircle(tri_pts(seed, 0), tri_pts(seed, 1), tri_pts(seed, 2), p) <= 0) return;

        // Cavity by flood fill over neighbours whose circumcircle holds p.
        cavity_.clear();
        in_cavity_.resize(tris_.size(), 0);
        cavity_.push_back(seed);
        in_cavity_[static_cast<std::size_t>(seed)] = 1;
        for (std::size_t q = 0; q < cavity_.size(); ++q) {
            const Tri& t = tris_[static_cast<std::size_t>(cavity_[q])];
            for (int k = 0; k < 3; ++k) {
                const long n = t.nb[k];
                if (n < 0 || in_cavity_[static_cast<std::size_t>(n)]) continue;
                const Tri& u = tris_[static_cast<std::size_t>(n)];
                if (incircle(pts_[u.v[0]], pts_[u.v[1]], pts_[u.v[2]], p) > 0) {
                    in_cavity_[static_cast<std::size_t>(n)] = 1;
                    cavity_.push_back(n);
                }
            }
        }
        // Grow until p sees every boundary edge from the left.
        for (bool grown = true; grown;) {
            grown = false;
            boundary_.clear();
            for (long c : cavity_) {
                const Tri& t = tris_[static_cast<std::size_t>(c)];
                for (int k = 0; k < 3; ++k) {
                    const long n = t.nb[k];
                    if (n >= 0 && in_cavity_[static_cast<std::size_t>(n)]) continue;
                    const std::size_t a = t.v[k], b = t.v[(k + 1) % 3];
                    if (n >= 0 && orient(pts_[a], pts_[b], p) <= 0) {
                        in_cavity_[static_cast<std::size_t>(n)] = 1;
                        cavity_.push_back(n);
                        grown = true;
                        break;
                    }
                    boundary_.push_back({a, b, n});
                }
                if (grown) break;
            }
        }

        // Fan of new triangles over the boundary, reusing cavity slots.
        for (long c : cavity_) {
            tris_[static_cast<std::size_t>(c)].alive = false;
            in_cavity_[static_cast<std::size_t>(c)] = 0;
        }
        std::vector<long> slots(cavity_.begin(), cavity_.end());
        std::sort(slots.begin(), slots.end());
        start_of_.clear();
        std::vector<long> made;
        made.reserve(boundary_.size());
        for (std::size_t e = 0; e < boundary_.size(); ++e) {
            long slot;
            if (e < slots.size()) {
                slot = slots[e];
            } else {
                slot = static_cast<long>(tris_.size());
                tris_.push_back({});
                in_cavity_.push_back(0);
            }
            const auto& [a, b, outer] = boundary_[e];
            tris_[static_cast<std::size_t>(slot)] = {{a, b, i}, {outer, -1, -1}};
            if (outer >= 0) {
                Tri& o = tris_[static_cast<std::size_t>(outer)];
                for (int k = 0; k < 3; ++k)
                    if (o.v[k] == b && o.v[(k + 1) % 3] == a) o.nb[k] = slot;
            }
            start_of_[a] = slot;
            made.push_back(slot);
        }
        for (long slot : made) {
            Tri& t = tris_[static_cast<std::size_t>(slot)];
            // edge (b, p) borders the fan triangle starting at b; edge (p, a)
            // borders the one ending at a.
            t.nb[1] = start_of_.at(t.v[1]);
            Tri& nxt = tris_[static_cast<std::size_t>(t.nb[1])];
            nxt.nb[2] = slot;
        }
        last_ = made.empty() ? last_ : made.front();
    }

    std::vector<Triangle> finish(std::size_t n) const {
        std::vector<Triangle> out;
        for (const auto& t : tris_) {
            if (!t.alive || t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
            if (orient(pts_[t.v[0]], pts_[t.v[1]], pts_[t.v[2]]) <= 0) continue;
            out.push_back({{t.v[0], t.v[1], t.v[2]}});
        }
        return out;
    }

private:
    const P& tri_pts(long t, int k) const { return pts_[tris_[static_cast<std::size_t>(t)].v[k]]; }

    long locate(const P& p) const {
        long t = last_;
        if (t < 0 || !tris_[static_cast<std::size_t>(t)].alive) t = first_alive();
        for (std::size_t steps = 0; steps <= tris_.size() && t >= 0; ++steps) {
            const Tri& tr = tris_[static_cast<std::size_t>(t)];
            long next = -2;
            for (int j = 0; j < 3; ++j) {
                const int k = static_cast<int>((steps + static_cast<std::size_t>(j)) % 3);
                if (orient(pts_[tr.v[k]], pts_[tr.v[(k + 1) % 3]], p) < 0) {
                    next = tr.nb[k];
                    break;
                }
            }
            if (next == -2) return t;
            t = next;
        }
        // Walk failed; scan.
        for (std::size_t k = 0; k < tris_.size(); ++k) {
            const Tri& tr = tris_[k];
            if (!tr.alive) continue;
            if (orient(pts_[tr.v[0]], pts_[tr.v[1]], p) >= 0 && orient(pts_[tr.v[1]], pts_[tr.v[2]], p) >= 0 &&
                orient(pts_[tr.v[2]], pts_[tr.v[0]], p) >= 0)
                return static_cast<long>(k);
        }
        return -1;
    }

    long first_alive() const {
        for (std::size_t k = 0; k < tris_.size(); ++k)
            if (tris_[k].alive) return static_cast<long>(k);
        return -1;
    }

    struct Edge {
        std::size_t a, b;
        long outer;
    };

    std::vector<P> pts_;
    std::vector<Tri> tris_;
    std::vector<long> cavity_;
    std::vector<char> in_cavity_;
    std::vector<Edge> boundary_;
    std::unordered_map<std::size_t, long> start_of_;
    long last_ = -1;
};

}  // namespace

double circumradius(Point a, Point b, Point c) {
    const double ab = distance(a, b), bc = distance(b, c), ca = distance(c, a);
    const double area2 = std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
    if (area2 == 0.0) return std::numeric_limits<double>::infinity();
    return ab * bc * ca / (2.0 * area2);
}

std::vector<Triangle> delaunay(const std::vector<Point>& points) {
    const std::size_t n = points.size();
    if (n < 3) return {};

    double minx = points[0].x, maxx = minx, miny = points[0].y, maxy = miny;
    for (const auto& p : points) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const Real cx = 0.5L * (minx + maxx), cy = 0.5L * (miny + maxy);
    Real extent = std::max(maxx - minx, maxy - miny) * 0.5L;
    if (extent <= 0) return {};

    std::vector<P> pts(n + 3);
    for (std::size_t i = 0; i < n; ++i) pts[i] = {(points[i].x - cx) / extent, (points[i].y - cy) / extent};
    constexpr Real M = 1e4L;
    pts[n] = {-3 * M, -3 * M};
    pts[n + 1] = {3 * M, -3 * M};
    pts[n + 2] = {0, 3 * M};

    std::vector<std::pair<std::uint64_t, std::size_t>> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto gx = static_cast<std::uint32_t>(std::clamp((pts[i].x + 1) * 32767.5L, 0.0L, 65535.0L));
        const auto gy = static_cast<std::uint32_t>(std::clamp((pts[i].y + 1) * 32767.5L, 0.0L, 65535.0L));
        order[i] = {hilbert_index(gx, gy, 16), i};
    }
    std::sort(order.begin(), order.end());

    Triangulator tr(std::move(pts));
    tr.init_super(n, n + 1, n + 2);
    for (const auto& [key, i] : order) tr.insert(i);
    return tr.finish(n);
}

double default_alpha(const std::vector<Point>& points) {
    if (points.size() < 2) return 0.0;
    std::vector<double> nn(points.size(), std::numeric_limits<double>::infinity());
    // Every nearest neighbour is a Delaunay neighbour.
    for (const auto& t : delaunay(points)) {
        for (int k = 0; k < 3; ++k) {
            const std::size_t a = t.v[k], b = t.v[(k + 1) % 3];
            const double d = distance(points[a], points[b]);
            nn[a] = std::min(nn[a], d);
            nn[b] = std::min(nn[b], d);
        }
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (std::isfinite(nn[i])) continue;
        for (std::size_t j = 0; j < points.size(); ++j)
            if (i != j) nn[i] = std::min(nn[i], distance(points[i], points[j]));
    }
    const auto mid = nn.begin() + static_cast<long>(nn.size() / 2);
    std::nth_element(nn.begin(), mid, nn.end());
    double median = *mid;
    if (nn.size() % 2 == 0) median = 0.5 * (median + *std::max_element(nn.begin(), mid));
    return 1.5 * median;
}

SurfacePartition surface_flags(const std::vector<Point>& points, double alpha) {
    SurfacePartition result;
    result.is_surface.assign(points.size(), true);

    std::vector<std::size_t> rep(points.size());
    std::vector<Point> unique;
    std::vector<std::size_t> unique_index;
    constexpr double kMerge = 1e-6;
    auto cell_key = [](long long cx, long long cy) {
        return static_cast<std::uint64_t>(cx) * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint64_t>(cy);
    };
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto cx = static_cast<long long>(std::floor(points[i].x / kMerge));
        const auto cy = static_cast<long long>(std::floor(points[i].y / kMerge));
        bool duplicate = false;
        std::size_t best = 0;
        for (long long dy = -1; dy <= 1; ++dy)
            for (long long dx = -1; dx <= 1; ++dx) {
                const auto it = grid.find(cell_key(cx + dx, cy + dy));
                if (it == grid.end()) continue;
                for (std::size_t u : it->second)
                    if (distance(points[i], unique[u]) < kMerge && (!duplicate || u < best)) {
                        best = u;
                        duplicate = true;
                    }
            }
        if (duplicate) {
            rep[i] = best;
            result.warnings.push_back("duplicate center " + std::to_string(i) + " merged with " +
                                      std::to_string(unique_index[best]));
        } else {
            rep[i] = unique.size();
            grid[cell_key(cx, cy)].push_back(unique.size());
            unique.push_back(points[i]);
            unique_index.push_back(i);
        }
    }

    const auto tris = delaunay(unique);
    std::map<std::pair<std::size_t, std::size_t>, int> edge_count;
    std::vector<bool> covered(unique.size(), false);
    for (const auto& t : tris) {
        if (circumradius(unique[t.v[0]], unique[t.v[1]], unique[t.v[2]]) > alpha) continue;
        result.kept.push_back({{unique_index[t.v[0]], unique_index[t.v[1]], unique_index[t.v[2]]}});
        for (int k = 0; k < 3; ++k) {
            const std::size_t a = t.v[k], b = t.v[(k + 1) % 3];
            ++edge_count[{std::min(a, b), std::max(a, b)}];
            covered[a] = true;
        }
    }
    std::vector<bool> surface(unique.size(), false);
    for (std::size_t u = 0; u < unique.size(); ++u)
        if (!covered[u]) surface[u] = true;
    for (const auto& [edge, count] : edge_count) {
        if (count == 1) surface[edge.first] = surface[edge.second] = true;
    }
    for (std::size_t i = 0; i < points.size(); ++i) result.is_surface[i] = surface[rep[i]];
    return result;
}

std::vector<std::string> surface_partition(std::vector<AtomDetection>& detections, double alpha) {
    auto part = surface_flags(centers(detections), alpha);
    for (std::size_t i = 0; i < detections.size(); ++i) detections[i].is_surface = part.is_surface[i];
    return std::move(part.warnings);
}

}  // namespace sbd
