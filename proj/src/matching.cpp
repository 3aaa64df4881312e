#include "pglf/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace pglf {

FeasibleRegion compute_feasible_region(double Z_min, double Z_max, const PlenopticIntrinsics& intr)
{
    intr.validate();
    require(std::isfinite(Z_min) && std::isfinite(Z_max), "feasible region: non-finite depth range");
    require(Z_min > intr.f_L, "feasible region: Z_min must exceed the focal length");
    require(Z_max >= Z_min, "feasible region: Z_max must not be below Z_min");
    FeasibleRegion fr;
    fr.Z_min = Z_min;
    fr.Z_max = Z_max;
    fr.v_max = v_from_depth(Z_min, intr);
    fr.v_min = v_from_depth(Z_max, intr);
    if (!(fr.v_max > 1))
        throw ValidationError("feasible region is empty: depth range [" + std::to_string(Z_min) + ", " +
                              std::to_string(Z_max) + "] mm maps to v <= 1");
    fr.v_min = std::max(fr.v_min, 1.0);
    fr.D_max = disparity_from_v(fr.v_max, intr);
    fr.D_min = std::max(0.0, disparity_from_v(fr.v_min, intr));
    fr.r = 0.5 * intr.D_mu * std::clamp(1.0 - 1.0 / fr.v_min, 0.25, 1.0);
    return fr;
}

void PsadConfig::validate() const
{
    require(w >= 3 && w % 2 == 1, "psad: window width must be odd and at least 3");
    require(tau1 > 0 && tau1 < 1, "psad: tau1 must lie in (0, 1)");
    require(sigma_phi_scale > 0 && tau2_scale > 0, "psad: scales must be positive");
    require(gate_cos > 0 && gate_cos < 1, "psad: gate_cos must lie in (0, 1)");
    require(disparity_step > 0, "psad: disparity step must be positive");
    require(min_overlap >= 0 && min_overlap <= 1, "psad: min_overlap must lie in [0, 1]");
}

PsadConfig PsadConfig::sad()
{
    PsadConfig c;
    c.use_weights = false;
    c.truncate = false;
    return c;
}

std::size_t DisparityField::valid_count() const
{
    std::size_t n = 0;
    for (auto v : valid.storage()) n += v != 0;
    return n;
}

double phase_distance(double a, double b)
{
    return std::abs(wrap_pi(a - b));
}

Gradient phase_gradient(const PhaseMap& phase, Pixel s, const LensletGrid* grid)
{
    const int own = grid ? grid->label(s.x, s.y) : -1;
    auto ok = [&](int x, int y) {
        if (!phase.valid(x, y)) return false;
        return !grid || grid->label(x, y) == own;
    };
    double gx[49], gy[49];
    int nx = 0, ny = 0;
    for (int dy = -3; dy <= 3; ++dy)
        for (int dx = -3; dx <= 3; ++dx) {
            const int x = s.x + dx, y = s.y + dy;
            if (ok(x - 1, y) && ok(x + 1, y)) gx[nx++] = 0.5 * wrap_pi(phase.phase(x + 1, y) - phase.phase(x - 1, y));
            if (ok(x, y - 1) && ok(x, y + 1)) gy[ny++] = 0.5 * wrap_pi(phase.phase(x, y + 1) - phase.phase(x, y - 1));
        }
    Gradient out;
    if (2 * nx < 49 || 2 * ny < 49) return out;
    auto median = [](double* v, int n) {
        std::nth_element(v, v + n / 2, v + n);
        const double hi = v[n / 2];
        if (n % 2) return hi;
        const double lo = *std::max_element(v, v + n / 2);
        return 0.5 * (lo + hi);
    };
    out.g = {median(gx, nx), median(gy, ny)};
    out.valid = true;
    return out;
}

namespace {

double weight_from(double dist, double dphi, double sigma_s, double sigma_phi)
{
    const double spatial = std::exp(-dist / (2 * sigma_s * sigma_s));
    double ph;
    if (sigma_phi > 0)
        ph = std::exp(-dphi * dphi / (2 * sigma_phi * sigma_phi));
    else
        ph = dphi == 0 ? 1.0 : 0.0;
    return spatial * ph;
}

bool template_ok(const PhaseMap& phase, const LensletGrid* grid, int lenslet, int x, int y)
{
    if (!phase.valid(x, y)) return false;
    return !grid || lenslet < 0 || grid->label(x, y) == lenslet;
}

int min_overlap_count(const PsadConfig& cfg)
{
    return std::max(1, static_cast<int>(std::ceil(cfg.min_overlap * cfg.w * cfg.w - 1e-9)));
}

} // namespace

WeightWindow psad_weight(const PhaseMap& phase, Pixel s_j, const Vec2& g, const Vec2& u, const PsadConfig& cfg,
                         const LensletGrid* grid, int template_lenslet)
{
    WeightWindow W;
    W.w = cfg.w;
    W.g = g;
    W.u = u;
    W.gu = std::abs(g.dot(u));
    W.sigma_phi = cfg.sigma_phi_scale * W.gu;
    W.tau2 = cfg.truncate ? cfg.tau2_scale * W.gu : std::numeric_limits<double>::infinity();
    const std::size_t n = static_cast<std::size_t>(cfg.w) * cfg.w;
    W.W0.assign(n, 0.0);
    W.W.assign(n, 0.0);
    W.inside.assign(n, 0);
    const int h = cfg.half();
    const double ss = cfg.spatial_sigma();
    const double center = phase.phase(s_j.x, s_j.y);
    for (int dy = -h; dy <= h; ++dy)
        for (int dx = -h; dx <= h; ++dx) {
            const int x = s_j.x + dx, y = s_j.y + dy;
            const std::size_t i = W.at(dx, dy);
            if (!template_ok(phase, grid, template_lenslet, x, y)) continue;
            W.inside[i] = 1;
            const double tangent = wrap_2pi(center + g.x() * dx + g.y() * dy);
            const double dphi = phase_distance(tangent, phase.phase(x, y));
            W.W0[i] = weight_from(std::hypot(dx, dy), dphi, ss, W.sigma_phi);
            W.W[i] = W.W0[i] >= cfg.tau1 ? 1.0 : 0.0;
        }
    return W;
}

bool sample_phase(const PhaseMap& phase, const LensletGrid& grid, int lenslet, const Vec2& p, double& out)
{
    if (lenslet < 0 || (p - grid.center(lenslet)).norm() > grid.radius()) return false;
    const double fx0 = std::floor(p.x()), fy0 = std::floor(p.y());
    const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
    const int xs[2] = {x0, x0 + 1}, ys[2] = {y0, y0 + 1};
    double v[4];
    int k = 0;
    for (int yy : ys)
        for (int xx : xs) {
            if (!phase.valid(xx, yy) || grid.label(xx, yy) != lenslet) return false;
            v[k++] = phase.phase(xx, yy);
        }
    const double fx = p.x() - fx0, fy = p.y() - fy0;
    const double base = v[0];
    const double a = base + wrap_pi(v[1] - base);
    const double b = base + wrap_pi(v[2] - base);
    const double c = base + wrap_pi(v[3] - base);
    const double top = base * (1 - fx) + a * fx;
    const double bottom = b * (1 - fx) + c * fx;
    out = wrap_2pi(top * (1 - fy) + bottom * fy);
    return true;
}

CostValue psad_cost(const PhaseMap& phase, Pixel s_j, double D, int /*template_lenslet*/, int target_lenslet,
                    const WeightWindow& W, const PsadConfig& cfg, const LensletGrid& grid)
{
    CostValue out;
    const int h = W.w / 2;
    const Vec2 shift = D * W.u;
    const bool target_weights = cfg.use_weights && cfg.weight_source == WeightSource::Target;
    double anchor = 0;
    if (target_weights &&
        !sample_phase(phase, grid, target_lenslet, Vec2(s_j.x, s_j.y) + shift, anchor))
        return out;
    const double ss = cfg.spatial_sigma();
    double sum = 0;
    for (int dy = -h; dy <= h; ++dy)
        for (int dx = -h; dx <= h; ++dx) {
            const std::size_t i = W.at(dx, dy);
            if (!W.inside[i]) continue;
            const Vec2 t = Vec2(s_j.x + dx, s_j.y + dy) + shift;
            double pt;
            if (!sample_phase(phase, grid, target_lenslet, t, pt)) continue;
            const double delta = phase_distance(phase.phase(s_j.x + dx, s_j.y + dy), pt);
            double weight = 1.0;
            if (cfg.use_weights) {
                if (target_weights) {
                    const double tangent = wrap_2pi(anchor + W.g.x() * dx + W.g.y() * dy);
                    weight = weight_from(std::hypot(dx, dy), phase_distance(tangent, pt), ss, W.sigma_phi) >= cfg.tau1
                                 ? 1.0 : 0.0;
                } else {
                    weight = W.W[i];
                }
            }
            ++out.n;
            if (weight > 0) ++out.n_weighted;
            sum += std::min(weight * delta, W.tau2);
        }
    if (out.n == 0) return out;
    if (out.n_weighted == 0) {
        out.degenerate = true;
        return out;
    }
    out.cost = sum / out.n;
    out.defined = out.n >= min_overlap_count(cfg);
    return out;
}

std::vector<double> disparity_candidates(const FeasibleRegion& region, double step)
{
    require(step > 0, "disparity step must be positive");
    const int n = static_cast<int>(std::floor((region.D_max - region.D_min) / step + 1e-9)) + 1;
    std::vector<double> out(static_cast<std::size_t>(std::max(n, 1)));
    for (int i = 0; i < static_cast<int>(out.size()); ++i) out[static_cast<std::size_t>(i)] = region.D_min + i * step;
    return out;
}

namespace {

struct Selection {
    bool found = false;
    double D = 0;
    double cost = 0;
};

Selection select_disparity(const double* cost, const std::uint8_t* defined, std::span<const double> cand,
                           const FeasibleRegion& region, const PsadConfig& cfg)
{
    Selection s;
    const int n = static_cast<int>(cand.size());
    int best = -1;
    for (int i = 0; i < n; ++i)
        if (defined[i] && (best < 0 || cost[i] < cost[best])) best = i;
    if (best < 0) return s;
    s.found = true;
    s.cost = cost[best];
    s.D = cand[static_cast<std::size_t>(best)];
    if (cfg.refine && best > 0 && best + 1 < n && defined[best - 1] && defined[best + 1]) {
        const double cm = cost[best - 1], c0 = cost[best], cp = cost[best + 1];
        const double den = cm - 2 * c0 + cp;
        if (den > 0) {
            const double delta = std::clamp(0.5 * (cm - cp) / den, -0.5, 0.5);
            s.D += delta * cfg.disparity_step;
        }
    }
    s.D = std::clamp(s.D, region.D_min, region.D_max);
    return s;
}

// Candidate indices of the coarse pass; empty when the search is exhaustive.
std::vector<int> coarse_indices(int n, const PsadConfig& cfg)
{
    std::vector<int> idx;
    const int k = cfg.coarse_step > 0 ? std::max(1, static_cast<int>(std::lround(cfg.coarse_step / cfg.disparity_step))) : 1;
    if (k <= 1 || n <= 2 * k) return idx;
    for (int i = 0; i < n; i += k) idx.push_back(i);
    if ((n - 1) % k != 0) idx.push_back(n - 1);
    return idx;
}

// Every k-th candidate first, then the full grid within k steps of the
// coarse minimum (all candidates when the coarse pass finds nothing).
// eval(coarse, first, count, cost, defined) fills `count` candidates: the
// coarse list from position `first`, or the contiguous range from `first`.
template <class Eval>
Selection search_disparity(const std::vector<double>& cand, const std::vector<int>& coarse, const FeasibleRegion& region,
                           const PsadConfig& cfg, Eval&& eval, std::vector<double>& cost, std::vector<std::uint8_t>& defined)
{
    const int n = static_cast<int>(cand.size());
    cost.resize(cand.size());
    defined.resize(cand.size());
    int lo = 0, hi = n - 1;
    if (!coarse.empty()) {
        const int nc = static_cast<int>(coarse.size());
        eval(true, 0, nc, cost.data(), defined.data());
        int best = -1;
        for (int j = 0; j < nc; ++j)
            if (defined[static_cast<std::size_t>(j)] && (best < 0 || cost[static_cast<std::size_t>(j)] < cost[static_cast<std::size_t>(best)]))
                best = j;
        if (best >= 0) {
            const int k = coarse.size() > 1 ? coarse[1] - coarse[0] : 1;
            lo = std::max(0, coarse[static_cast<std::size_t>(best)] - k);
            hi = std::min(n - 1, coarse[static_cast<std::size_t>(best)] + k);
        }
    }
    eval(false, lo, hi - lo + 1, cost.data(), defined.data());
    return select_disparity(cost.data(), defined.data(),
                            std::span<const double>(cand).subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo + 1)),
                            region, cfg);
}

DisparityField empty_field(const PhaseMap& phase, const FeasibleRegion& region)
{
    DisparityField f;
    f.D = Image(phase.width(), phase.height(), std::numeric_limits<double>::quiet_NaN());
    f.count = Grid<std::uint8_t>(phase.width(), phase.height(), 0);
    f.valid = Mask(phase.width(), phase.height(), 0);
    f.cost = Image(phase.width(), phase.height(), std::numeric_limits<double>::quiet_NaN());
    f.region = region;
    return f;
}

struct Member {
    int x, y, li;
    bool weighted;
};

// Per-thread scratch for one lenslet.
struct Workspace {
    int x0 = 0, y0 = 0, bw = 0, bh = 0, compact = 0;
    std::vector<int> local;           // box index -> compact index or -1
    std::vector<double> delta;        // compact index * nD + candidate; -1 outside E
    std::vector<std::uint32_t> stamp; // an entry is current iff its stamp equals generation
    std::vector<double> coarse_delta; // compact index * coarse count + coarse position
    std::vector<std::uint32_t> coarse_stamp;
    std::uint32_t generation = 0;
    std::vector<Member> members;
    std::vector<double> sum;
    std::vector<double> n, nw;
    std::vector<double> cost;
    std::vector<std::uint8_t> defined;
};

struct TemplateInfo {
    Pixel s;
    Gradient g;
    double D_sum = 0;
    double cost_sum = 0;
    int count = 0;
};

void match_group(const PhaseMap& phase, const LensletGrid& grid, const FeasibleRegion& region, const PsadConfig& cfg,
                 const std::vector<double>& cand, const std::vector<int>& coarse_idx, int lenslet,
                 std::vector<TemplateInfo>& templates, Workspace& ws)
{
    const Vec2 c = grid.center(lenslet);
    const int h = cfg.half();
    const int nD = static_cast<int>(cand.size());
    const double R = grid.radius();
    ws.x0 = static_cast<int>(std::floor(c.x() - R)) - 1;
    ws.y0 = static_cast<int>(std::floor(c.y() - R)) - 1;
    ws.bw = static_cast<int>(std::ceil(2 * R)) + 3;
    ws.bh = ws.bw;
    ws.local.assign(static_cast<std::size_t>(ws.bw) * ws.bh, -1);
    int compact = 0;
    for (int y = 0; y < ws.bh; ++y)
        for (int x = 0; x < ws.bw; ++x)
            if (template_ok(phase, &grid, lenslet, ws.x0 + x, ws.y0 + y))
                ws.local[static_cast<std::size_t>(y) * ws.bw + x] = compact++;
    ws.compact = compact;
    ws.delta.resize(static_cast<std::size_t>(compact) * nD);
    // a stale stamp can never equal a later generation, so old entries need no reset
    ws.stamp.resize(static_cast<std::size_t>(compact) * nD, 0);
    const int nc = static_cast<int>(coarse_idx.size());
    ws.coarse_delta.resize(static_cast<std::size_t>(compact) * static_cast<std::size_t>(nc));
    ws.coarse_stamp.resize(static_cast<std::size_t>(compact), 0);
    ws.cost.resize(static_cast<std::size_t>(nD));
    ws.defined.resize(static_cast<std::size_t>(nD));
    const int min_count = min_overlap_count(cfg);
    auto local_index = [&](int x, int y) {
        const int lx = x - ws.x0, ly = y - ws.y0;
        if (lx < 0 || ly < 0 || lx >= ws.bw || ly >= ws.bh) return -1;
        return ws.local[static_cast<std::size_t>(ly) * ws.bw + lx];
    };

    for (const LensletNeighbor& nb : grid.neighbors(lenslet)) {
        ++ws.generation;
        for (TemplateInfo& tp : templates) {
            if (!tp.g.valid) continue;
            const double gn = tp.g.g.norm();
            if (!(gn > 0) || tp.g.g.dot(nb.u) / gn < cfg.gate_cos) continue;
            const WeightWindow W = psad_weight(phase, tp.s, tp.g.g, nb.u, cfg, &grid, lenslet);
            const double tau2 = W.tau2;
            ws.members.clear();
            for (int dy = -h; dy <= h; ++dy)
                for (int dx = -h; dx <= h; ++dx) {
                    const std::size_t wi = W.at(dx, dy);
                    if (!W.inside[wi]) continue;
                    const int li = local_index(tp.s.x + dx, tp.s.y + dy);
                    ws.members.push_back({tp.s.x + dx, tp.s.y + dy, li, !cfg.use_weights || W.W[wi] > 0});
                }
            auto eval = [&](bool coarse, int first, int count, double* cost, std::uint8_t* defined) {
                ws.sum.assign(static_cast<std::size_t>(count), 0.0);
                ws.n.assign(static_cast<std::size_t>(count), 0.0);
                ws.nw.assign(static_cast<std::size_t>(count), 0.0);
                double* sum = ws.sum.data();
                double* cn = ws.n.data();
                double* cw = ws.nw.data();
                for (const Member& m : ws.members) {
                    const double own = phase.phase(m.x, m.y);
                    auto delta_at = [&](int i) {
                        double pt;
                        return sample_phase(phase, grid, nb.index, Vec2(m.x, m.y) + cand[static_cast<std::size_t>(i)] * nb.u, pt)
                                   ? phase_distance(own, pt) : -1.0;
                    };
                    const double* del;
                    if (coarse) {
                        double* row = ws.coarse_delta.data() + static_cast<std::size_t>(m.li) * static_cast<std::size_t>(nc);
                        if (ws.coarse_stamp[static_cast<std::size_t>(m.li)] != ws.generation) {
                            ws.coarse_stamp[static_cast<std::size_t>(m.li)] = ws.generation;
                            for (int j = 0; j < nc; ++j) row[j] = delta_at(coarse_idx[static_cast<std::size_t>(j)]);
                        }
                        del = row + first;
                    } else {
                        const std::size_t base = static_cast<std::size_t>(m.li) * nD + static_cast<std::size_t>(first);
                        double* row = ws.delta.data() + base;
                        std::uint32_t* st = ws.stamp.data() + base;
                        for (int j = 0; j < count; ++j)
                            if (st[j] != ws.generation) {
                                st[j] = ws.generation;
                                row[j] = delta_at(first + j);
                            }
                        del = row;
                    }
                    // unweighted members add min(0, tau2) = 0 and only count towards |E|
                    if (m.weighted) {
                        for (int j = 0; j < count; ++j) {
                            const bool in = del[j] >= 0;
                            cn[j] += in ? 1.0 : 0.0;
                            cw[j] += in ? 1.0 : 0.0;
                            sum[j] += in ? std::min(del[j], tau2) : 0.0;
                        }
                    } else {
                        for (int j = 0; j < count; ++j) cn[j] += del[j] >= 0 ? 1.0 : 0.0;
                    }
                }
                for (int j = 0; j < count; ++j) {
                    defined[j] = cn[j] > 0 && cw[j] > 0 && cn[j] >= min_count;
                    cost[j] = defined[j] ? sum[j] / cn[j] : 0.0;
                }
            };
            const Selection sel = search_disparity(cand, coarse_idx, region, cfg, eval, ws.cost, ws.defined);
            if (sel.found) {
                tp.D_sum += sel.D;
                tp.cost_sum += sel.cost;
                ++tp.count;
            }
        }
    }
}

void write_result(const std::vector<TemplateInfo>& templates, const FeasibleRegion& region, DisparityField& out)
{
    for (const TemplateInfo& tp : templates) {
        if (tp.count == 0) continue;
        out.D(tp.s.x, tp.s.y) = std::clamp(tp.D_sum / tp.count, region.D_min, region.D_max);
        out.cost(tp.s.x, tp.s.y) = tp.cost_sum / tp.count;
        out.count(tp.s.x, tp.s.y) = static_cast<std::uint8_t>(tp.count);
        out.valid(tp.s.x, tp.s.y) = 1;
    }
}

void check_inputs(const PhaseMap& phase, const LensletGrid& grid, const FeasibleRegion& region, const PsadConfig& cfg)
{
    cfg.validate();
    require(phase.width() == grid.width() && phase.height() == grid.height(),
            "matching: phase map and lenslet grid differ in size");
    require(region.D_min >= 0 && region.D_max >= region.D_min && region.D_max < grid.diameter(),
            "matching: invalid feasible region");
}

void run_reference(const PhaseMap& phase, const LensletGrid& grid, const FeasibleRegion& region,
                   const PsadConfig& cfg, const std::vector<Pixel>& pixels, DisparityField& out)
{
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(pixels.size()); ++k) {
        const Pixel s = pixels[static_cast<std::size_t>(k)];
        const auto dirs = match_pixel_reference(phase, grid, region, cfg, s);
        TemplateInfo tp{s, {}, 0, 0, 0};
        for (const auto& d : dirs)
            if (d.found) {
                tp.D_sum += d.D;
                tp.cost_sum += d.cost;
                ++tp.count;
            }
        std::vector<TemplateInfo> one{tp};
        write_result(one, region, out);
    }
}

DisparityField match_grouped(const PhaseMap& phase, const LensletGrid& grid, const FeasibleRegion& region,
                             const PsadConfig& cfg, const std::vector<std::vector<Pixel>>& groups)
{
    DisparityField out = empty_field(phase, region);
    if (cfg.use_weights && cfg.weight_source == WeightSource::Target) {
        std::vector<Pixel> all;
        for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
        run_reference(phase, grid, region, cfg, all, out);
        return out;
    }
    const auto cand = disparity_candidates(region, cfg.disparity_step);
    const auto coarse_idx = coarse_indices(static_cast<int>(cand.size()), cfg);
#pragma omp parallel
    {
        Workspace ws;
        std::vector<TemplateInfo> templates;
#pragma omp for schedule(dynamic, 4)
        for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(groups.size()); ++t) {
            const auto& g = groups[static_cast<std::size_t>(t)];
            if (g.empty()) continue;
            templates.clear();
            for (const Pixel& s : g) templates.push_back({s, phase_gradient(phase, s, &grid), 0, 0, 0});
            match_group(phase, grid, region, cfg, cand, coarse_idx, static_cast<int>(t), templates, ws);
            write_result(templates, region, out);
        }
    }
    return out;
}

} // namespace

DisparityField match_lenslets(const PhaseMap& phase, const LensletGrid& grid, const FeasibleRegion& region,
                              const PsadConfig& cfg)
{
    check_inputs(phase, grid, region, cfg);
    std::vector<std::vector<Pixel>> groups(static_cast<std::size_t>(grid.size()));
    for (int t = 0; t < grid.size(); ++t) {
        const Vec2 c = grid.center(t);
        const int rr = static_cast<int>(std::ceil(region.r));
        for (int y = static_cast<int>(std::round(c.y())) - rr; y <= static_cast<int>(std::round(c.y())) + rr; ++y)
            for (int x = static_cast<int>(std::round(c.x())) - rr; x <= static_cast<int>(std::round(c.x())) + rr; ++x)
                if (grid.label(x, y) == t && std::hypot(x - c.x(), y - c.y()) <= region.r && phase.valid(x, y))
                    groups[static_cast<std::size_t>(t)].push_back({x, y});
    }
    return match_grouped(phase, grid, region, cfg, groups);
}

DisparityField match_pixels(const PhaseMap& phase, const LensletGrid& grid, const FeasibleRegion& region,
                            const PsadConfig& cfg, std::span<const Pixel> pixels)
{
    check_inputs(phase, grid, region, cfg);
    std::vector<std::vector<Pixel>> groups(static_cast<std::size_t>(grid.size()));
    for (const Pixel& s : pixels) {
        const int t = grid.label(s.x, s.y);
        if (t < 0 || !phase.valid(s.x, s.y)) continue;
        auto& g = groups[static_cast<std::size_t>(t)];
        if (std::find(g.begin(), g.end(), s) == g.end()) g.push_back(s);
    }
    return match_grouped(phase, grid, region, cfg, groups);
}

std::vector<DirectionMatch> match_pixel_reference(const PhaseMap& phase, const LensletGrid& grid,
                                                  const FeasibleRegion& region, const PsadConfig& cfg, Pixel s_j)
{
    std::vector<DirectionMatch> out;
    const int t = grid.label(s_j.x, s_j.y);
    if (t < 0 || !phase.valid(s_j.x, s_j.y)) return out;
    const Gradient g = phase_gradient(phase, s_j, &grid);
    if (!g.valid) return out;
    const double gn = g.g.norm();
    if (!(gn > 0)) return out;
    const auto cand = disparity_candidates(region, cfg.disparity_step);
    const auto coarse_idx = coarse_indices(static_cast<int>(cand.size()), cfg);
    std::vector<double> cost;
    std::vector<std::uint8_t> defined;
    for (const LensletNeighbor& nb : grid.neighbors(t)) {
        if (g.g.dot(nb.u) / gn < cfg.gate_cos) continue;
        const WeightWindow W = psad_weight(phase, s_j, g.g, nb.u, cfg, &grid, t);
        auto eval = [&](bool coarse, int first, int count, double* c, std::uint8_t* d) {
            for (int j = 0; j < count; ++j) {
                const int i = coarse ? coarse_idx[static_cast<std::size_t>(first + j)] : first + j;
                const CostValue cv = psad_cost(phase, s_j, cand[static_cast<std::size_t>(i)], t, nb.index, W, cfg, grid);
                c[j] = cv.defined ? cv.cost : 0.0;
                d[j] = cv.defined;
            }
        };
        const Selection sel = search_disparity(cand, coarse_idx, region, cfg, eval, cost, defined);
        out.push_back({nb.index, sel.D, sel.cost, sel.found});
    }
    return out;
}

} // namespace pglf
