#include "engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hyperctrl/quadrature.hpp"

namespace hyperctrl::detail {

namespace {

enum class Foot : std::uint8_t { time_lo, time_hi, x0, x1 };

/** @brief Where the characteristic through a node meets the data, in grid units. */
struct Path {
    Foot kind;
    int steps;
    double frac;
    double foot_level;
    double foot_y;
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMaxWeightExponent = 600.0;
constexpr std::size_t kCoefficientCacheLimit = 25'000'000;
constexpr int kMaxPasses = 20;

class Engine {
public:
    Engine(const EngineInput& in, SolutionField& w)
        : in_(in), w_(w), disc_(*in.disc), spec_(disc_.spec()), rule_(quad::UniformRule::instance()) {
        n_ = spec_.n();
        Nt_ = disc_.time().Nt;
        dt_ = disc_.time().dt;
        for (int i = 1; i <= n_; ++i) {
            grids_.push_back(&disc_.state().comp(i));
            sgn_.push_back(spec_.is_minus(i) ? 1 : -1);
        }
        build_rows();
        build_caches();
    }

    PicardReport run();
    PicardReport run_subset(int sidx, double c_est);

private:
    std::size_t size(int c) const { return static_cast<std::size_t>(grids_[c]->size()); }
    std::size_t flat(int c, int level, int p) const {
        return static_cast<std::size_t>(level) * size(c) + static_cast<std::size_t>(p);
    }
    int region(int c, std::size_t idx) const {
        return in_.region.empty() ? 0 : static_cast<int>(in_.region[c][idx]);
    }

    void build_rows();
    void build_caches();
    void coefficient_row(int c, int level, int p, double* buffer, double* out) const;
    void compute_sources();
    void compute_prefix();
    Path trace(int c, int level, int p, int d) const;
    double path_integral(int c, int level, int p, int d, const Path& path) const;
    double foot_value(int c, std::size_t idx, const Path& path, int level, int p);
    double boundary_value(int c, double foot_level) const;
    double s_at(int c, int level, int p) const { return S_[c][flat(c, level, p)]; }
    double s_time_interp(int c, double level, int p) const;
    void update_node(int c, int level, int p, bool boundary_phase);
    void boundary_phase();

    struct Entry {
        int j;
        std::vector<Stencil> stencil;
    };

    const EngineInput& in_;
    SolutionField& w_;
    const Discretization& disc_;
    const SystemSpec& spec_;
    const quad::UniformRule& rule_;
    int n_ = 0;
    int Nt_ = 0;
    double dt_ = 0.0;
    std::vector<const ComponentGrid*> grids_;
    std::vector<int> sgn_;
    std::vector<std::vector<Entry>> rows_;
    bool coupled_ = false;
    bool cache_coeffs_ = false;
    std::vector<std::vector<std::vector<double>>> coeff_;
    std::vector<std::vector<double>> gamma_;
    std::vector<bool> has_s_;
    std::vector<std::vector<double>> S_;
    std::vector<std::vector<double>> pre_;
    std::vector<std::vector<double>> bc_;
    std::vector<std::vector<double>> footval_;
    std::vector<std::vector<std::uint8_t>> footset_;
    std::vector<std::vector<double>> psi_;
    double fmax_ = 0.0;
};

void Engine::build_rows() {
    rows_.assign(static_cast<std::size_t>(n_), {});
    const auto& pattern = spec_.coupling().pattern();
    std::vector<std::vector<bool>> used(static_cast<std::size_t>(n_), std::vector<bool>(n_, false));
    for (const auto& [i, j] : pattern) {
        if (in_.dual) {
            used[j][i] = true;
        } else {
            used[i][j] = true;
        }
    }
    if (in_.dual) {
        for (int c = 0; c < n_; ++c) {
            if (!spec_.speed(c + 1).is_constant()) {
                used[c][c] = true;
            }
        }
    }
    for (int c = 0; c < n_; ++c) {
        for (int j = 0; j < n_; ++j) {
            if (!used[c][j]) {
                continue;
            }
            Entry e;
            e.j = j;
            e.stencil.resize(size(c));
            for (int p = 0; p < grids_[c]->size(); ++p) {
                if (j == c) {
                    e.stencil[p] = {p, 0.0};
                } else {
                    e.stencil[p] = grids_[j]->locate_x(grids_[c]->x(p));
                }
            }
            rows_[c].push_back(std::move(e));
            coupled_ = true;
        }
    }
}

void Engine::coefficient_row(int c, int level, int p, double* buffer, double* out) const {
    const double t = disc_.time().t(level) + in_.shift;
    const double x = grids_[c]->x(p);
    spec_.coupling().eval(t, x, buffer);
    for (std::size_t e = 0; e < rows_[c].size(); ++e) {
        const int j = rows_[c][e].j;
        if (in_.dual) {
            double v = -buffer[j * n_ + c];
            if (j == c) {
                v += spec_.sigma_prime(c + 1, x);
            }
            out[e] = v;
        } else {
            out[e] = buffer[c * n_ + j];
        }
    }
}

void Engine::build_caches() {
    const int levels = Nt_ + 1;
    std::size_t total = 0;
    for (int c = 0; c < n_; ++c) {
        total += rows_[c].size() * size(c) * static_cast<std::size_t>(levels);
    }
    cache_coeffs_ = coupled_ && total <= kCoefficientCacheLimit;
    std::vector<double> buffer(static_cast<std::size_t>(n_ * n_));
    std::vector<double> row(static_cast<std::size_t>(n_));
    fmax_ = 0.0;
    if (cache_coeffs_) {
        coeff_.resize(static_cast<std::size_t>(n_));
        for (int c = 0; c < n_; ++c) {
            coeff_[c].assign(rows_[c].size(), std::vector<double>(size(c) * levels, 0.0));
            if (rows_[c].empty()) {
                continue;
            }
            for (int l = 0; l < levels; ++l) {
                for (int p = 0; p < grids_[c]->size(); ++p) {
                    const std::size_t idx = flat(c, l, p);
                    if (region(c, idx) < 0) {
                        continue;
                    }
                    coefficient_row(c, l, p, buffer.data(), row.data());
                    for (std::size_t e = 0; e < rows_[c].size(); ++e) {
                        coeff_[c][e][idx] = row[e];
                        fmax_ = std::max(fmax_, std::abs(row[e]));
                    }
                }
            }
        }
    } else if (coupled_) {
        for (int c = 0; c < n_; ++c) {
            if (rows_[c].empty()) {
                continue;
            }
            const int stride = std::max(1, levels / 64);
            for (int l = 0; l < levels; l += stride) {
                for (int p = 0; p < grids_[c]->size(); ++p) {
                    coefficient_row(c, l, p, buffer.data(), row.data());
                    for (std::size_t e = 0; e < rows_[c].size(); ++e) {
                        fmax_ = std::max(fmax_, std::abs(row[e]));
                    }
                }
            }
        }
    }
    has_s_.assign(static_cast<std::size_t>(n_), false);
    gamma_.assign(static_cast<std::size_t>(n_), {});
    for (int c = 0; c < n_; ++c) {
        has_s_[c] = !rows_[c].empty() || static_cast<bool>(in_.source);
        if (in_.source) {
            gamma_[c].assign(size(c) * levels, 0.0);
            for (int l = 0; l < levels; ++l) {
                for (int p = 0; p < grids_[c]->size(); ++p) {
                    const std::size_t idx = flat(c, l, p);
                    if (region(c, idx) >= 0) {
                        gamma_[c][idx] = in_.source(c + 1, disc_.time().t(l), grids_[c]->x(p));
                    }
                }
            }
        }
    }
    S_.assign(static_cast<std::size_t>(n_), {});
    pre_.assign(static_cast<std::size_t>(n_), {});
    footval_.assign(static_cast<std::size_t>(n_), {});
    footset_.assign(static_cast<std::size_t>(n_), {});
    for (int c = 0; c < n_; ++c) {
        if (has_s_[c]) {
            S_[c].assign(size(c) * levels, 0.0);
            pre_[c].assign(size(c) * levels, 0.0);
        }
        footval_[c].assign(size(c) * levels, 0.0);
        footset_[c].assign(size(c) * levels, 0);
    }
    bc_.assign(static_cast<std::size_t>(n_), std::vector<double>(static_cast<std::size_t>(levels), 0.0));
}

void Engine::compute_sources() {
    const int levels = Nt_ + 1;
    std::vector<double> buffer(static_cast<std::size_t>(n_ * n_));
    std::vector<double> row(static_cast<std::size_t>(n_));
    for (int c = 0; c < n_; ++c) {
        if (!has_s_[c]) {
            continue;
        }
        auto& S = S_[c];
        for (int l = 0; l < levels; ++l) {
            for (int p = 0; p < grids_[c]->size(); ++p) {
                const std::size_t idx = flat(c, l, p);
                if (region(c, idx) < 0) {
                    S[idx] = 0.0;
                    continue;
                }
                double value = gamma_[c].empty() ? 0.0 : gamma_[c][idx];
                if (!rows_[c].empty()) {
                    if (!cache_coeffs_) {
                        coefficient_row(c, l, p, buffer.data(), row.data());
                    }
                    for (std::size_t e = 0; e < rows_[c].size(); ++e) {
                        const Entry& entry = rows_[c][e];
                        const double coef = cache_coeffs_ ? coeff_[c][e][idx] : row[e];
                        if (coef == 0.0) {
                            continue;
                        }
                        const Stencil& s = entry.stencil[p];
                        const auto& wj = w_.data(entry.j + 1);
                        const std::size_t base = flat(entry.j, l, 0);
                        double wv = wj[base + s.a];
                        if (s.theta != 0.0) {
                            wv = (1.0 - s.theta) * wv + s.theta * wj[base + s.a + 1];
                        }
                        value += coef * wv;
                    }
                }
                S[idx] = value;
            }
        }
    }
}

void Engine::compute_prefix() {
    const int levels = Nt_ + 1;
    for (int c = 0; c < n_; ++c) {
        if (!has_s_[c]) {
            continue;
        }
        const int P = grids_[c]->regular();
        const int s = sgn_[c];
        auto& pre = pre_[c];
        const auto& S = S_[c];
        for (int l = 0; l < levels; ++l) {
            for (int p = 0; p <= P; ++p) {
                const std::size_t idx = flat(c, l, p);
                const int pp = p - s;
                if (l >= 1 && pp >= 0 && pp <= P) {
                    const std::size_t prev = flat(c, l - 1, pp);
                    pre[idx] = pre[prev] + 0.5 * dt_ * (S[prev] + S[idx]);
                } else {
                    pre[idx] = 0.0;
                }
            }
        }
    }
}

Path Engine::trace(int c, int level, int p, int d) const {
    const ComponentGrid& g = *grids_[c];
    const int P = g.regular();
    const int e = sgn_[c] * d;
    const int qt = d < 0 ? level : Nt_ - level;
    const Foot time_foot = d < 0 ? Foot::time_lo : Foot::time_hi;
    if (qt == 0) {
        return {time_foot, 0, 0.0, static_cast<double>(level), g.y(p)};
    }
    if (p <= P) {
        if (e < 0) {
            if (p <= qt) {
                return {Foot::x0, p, 0.0, static_cast<double>(level + d * p), 0.0};
            }
            return {time_foot, qt, 0.0, static_cast<double>(level + d * qt), (p - qt) * dt_};
        }
        const int qx = P - p;
        const double rem = g.remainder();
        if (qx + rem <= qt + 1e-9) {
            return {Foot::x1, qx, rem, level + d * (qx + rem), g.tau()};
        }
        return {time_foot, qt, 0.0, static_cast<double>(level + d * qt), (p + qt) * dt_};
    }
    // End node at x = 1 (only present when tau is not a multiple of dt).
    if (e > 0) {
        return {Foot::x1, 0, 0.0, static_cast<double>(level), g.tau()};
    }
    const double D = P + g.remainder();
    if (D <= qt + 1e-9) {
        return {Foot::x0, P, g.remainder(), level + d * D, 0.0};
    }
    return {time_foot, qt, 0.0, static_cast<double>(level + d * qt), g.tau() - qt * dt_};
}

double Engine::s_time_interp(int c, double level, int p) const {
    int a = static_cast<int>(std::floor(level));
    double theta = level - a;
    if (a >= Nt_) {
        a = Nt_;
        theta = 0.0;
    }
    if (a < 0) {
        a = 0;
        theta = 0.0;
    }
    const double v = s_at(c, a, p);
    if (theta < 1e-12) {
        return v;
    }
    return (1.0 - theta) * v + theta * s_at(c, a + 1, p);
}

double Engine::path_integral(int c, int level, int p, int d, const Path& path) const {
    if (!has_s_[c]) {
        return 0.0;
    }
    const ComponentGrid& g = *grids_[c];
    const int P = g.regular();
    const int s = sgn_[c];
    const int e = s * d;
    double integral = 0.0;
    double buf[quad::UniformRule::kMaxClosed + 1];
    if (p <= P) {
        if (path.steps > 0) {
            const int l2 = level + d * path.steps;
            const int p2 = p + e * path.steps;
            const int llo = d < 0 ? l2 : level;
            const int plo = d < 0 ? p2 : p;
            const int lhi = d < 0 ? level : l2;
            const int phi = d < 0 ? p : p2;
            const int steps = path.steps;
            if (steps <= quad::UniformRule::kMaxClosed) {
                for (int r = 0; r <= steps; ++r) {
                    buf[r] = s_at(c, llo + r, plo + s * r);
                }
                integral = rule_.apply(buf, steps, dt_);
            } else {
                integral = pre_[c][flat(c, lhi, phi)] - pre_[c][flat(c, llo, plo)];
                const auto corr = rule_.correction();
                double sum = 0.0;
                for (int r = 0; r < quad::UniformRule::kCorrection; ++r) {
                    sum += corr[r] * (s_at(c, llo + r, plo + s * r) + s_at(c, lhi - r, phi - s * r));
                }
                integral += dt_ * sum;
            }
        }
        if (path.frac > 0.0) {
            const int lp = level + d * path.steps;
            const double s_last = s_at(c, lp, P);
            const double s_foot = s_time_interp(c, path.foot_level, P + 1);
            integral += 0.5 * path.frac * dt_ * (s_last + s_foot);
        }
        return integral;
    }
    // End-node path: samples sit between regular nodes at fraction `rem`.
    const double rem = g.remainder();
    std::vector<double> samples(static_cast<std::size_t>(path.steps) + 1);
    samples[0] = s_at(c, level, P + 1);
    for (int r = 1; r <= path.steps; ++r) {
        const int l = level + d * r;
        samples[r] = (1.0 - rem) * s_at(c, l, P - r) + rem * s_at(c, l, P - r + 1);
    }
    integral = rule_.apply(samples.data(), path.steps, dt_);
    if (path.kind == Foot::x0 && path.frac > 0.0) {
        const double s_foot = s_time_interp(c, path.foot_level, 0);
        integral += 0.5 * path.frac * dt_ * (samples.back() + s_foot);
    }
    return integral;
}

double Engine::boundary_value(int c, double foot_level) const {
    int a = static_cast<int>(std::floor(foot_level + 1e-9));
    double theta = foot_level - a;
    if (theta < 1e-9) {
        theta = 0.0;
    }
    a = std::clamp(a, 0, Nt_);
    const auto& bc = bc_[c];
    auto fed = [&](int level) { return in_.rule == nullptr || in_.rule->fed(c + 1, level); };
    auto fail = [&]() {
        return Error("internal: characteristic of component " + std::to_string(c + 1) +
                     " reaches x = 0 where it is not prescribed");
    };
    if (theta == 0.0 || a == Nt_) {
        if (!fed(a)) {
            throw fail();
        }
        return bc[a];
    }
    if (!fed(a + 1)) {
        throw fail();
    }
    if (!fed(a)) {
        // The prescribed trace starts inside this cell; extrapolate from the fed side.
        if (a + 2 <= Nt_ && fed(a + 2)) {
            return bc[a + 1] + (theta - 1.0) * (bc[a + 2] - bc[a + 1]);
        }
        return bc[a + 1];
    }
    return (1.0 - theta) * bc[a] + theta * bc[a + 1];
}

double Engine::foot_value(int c, std::size_t idx, const Path& path, int level, int p) {
    (void)level;
    (void)p;
    if (path.kind == Foot::x0) {
        return boundary_value(c, path.foot_level);
    }
    if (footset_[c][idx]) {
        return footval_[c][idx];
    }
    const ComponentGrid& g = *grids_[c];
    double value = 0.0;
    switch (path.kind) {
        case Foot::time_lo:
        case Foot::time_hi: {
            const StateFn& fn = path.kind == Foot::time_lo ? in_.time_lo : in_.time_hi;
            if (fn) {
                const double r = path.foot_y / dt_;
                const int a = static_cast<int>(std::lround(r));
                double x;
                if (std::abs(r - a) < 1e-9 && a <= g.regular()) {
                    x = g.x(a);
                } else if (std::abs(path.foot_y - g.tau()) < 1e-12) {
                    x = 1.0;
                } else {
                    x = g.map().x(path.foot_y);
                }
                value = fn(c + 1, x);
            }
            break;
        }
        case Foot::x1:
            if (in_.x1) {
                value = in_.x1(c + 1, disc_.time().t0 + path.foot_level * dt_);
            }
            break;
        case Foot::x0:
            break;
    }
    footval_[c][idx] = value;
    footset_[c][idx] = 1;
    return value;
}

void Engine::update_node(int c, int level, int p, bool boundary_phase) {
    const std::size_t idx = flat(c, level, p);
    const int d = in_.direction[c][idx];
    const Path path = trace(c, level, p, d);
    if ((path.kind == Foot::x0) != boundary_phase) {
        return;
    }
    double foot = foot_value(c, idx, path, level, p);
    if (path.kind == Foot::x0 || path.kind == Foot::x1) {
        // A foot on the corner where time data meet boundary data sits on a jump; take the mean of both sides.
        const double end = d < 0 ? 0.0 : static_cast<double>(Nt_);
        const StateFn& fn = d < 0 ? in_.time_lo : in_.time_hi;
        if (fn && std::abs(path.foot_level - end) < 1e-9) {
            foot = 0.5 * (foot + fn(c + 1, path.kind == Foot::x0 ? 0.0 : 1.0));
        }
    }
    const double integral = path_integral(c, level, p, d, path);
    w_.data(c + 1)[idx] = d < 0 ? foot + integral : foot - integral;
}

void Engine::boundary_phase() {
    std::vector<double> v(static_cast<std::size_t>(n_));
    for (int l = 0; l <= Nt_; ++l) {
        for (int c = 0; c < n_; ++c) {
            v[c] = w_.data(c + 1)[flat(c, l, 0)];
        }
        if (in_.rule != nullptr) {
            in_.rule->apply(l, v.data());
        }
        for (int c = 0; c < n_; ++c) {
            bc_[c][l] = v[c];
        }
    }
}

PicardReport Engine::run_subset(int sidx, double c_est) {
    const int levels = Nt_ + 1;
    PicardReport part;
    part.label = in_.subsets[sidx].label;
    double psi_min = std::numeric_limits<double>::infinity();
    double psi_max = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    for (int c = 0; c < n_; ++c) {
        psi_[c].assign(size(c) * levels, 0.0);
        for (int l = 0; l < levels; ++l) {
            for (int p = 0; p < grids_[c]->size(); ++p) {
                const std::size_t idx = flat(c, l, p);
                if (region(c, idx) != sidx) {
                    continue;
                }
                ++count;
                const double v = in_.subsets[sidx].psi(disc_.time().t(l), grids_[c]->x(p));
                psi_[c][idx] = v;
                psi_min = std::min(psi_min, v);
                psi_max = std::max(psi_max, v);
            }
        }
    }
    if (count == 0) {
        part.converged = true;
        return part;
    }
    double L = 2.0 * c_est;
    const double range = psi_max - psi_min;
    if (range > 0.0 && L * range > kMaxWeightExponent) {
        L = kMaxWeightExponent / range;
    }
    part.weight_L = L;
    double prev_weighted = kNegInf;
    double prev_weighted_norm = kNegInf;
    int bad_streak = 0;
    std::vector<std::vector<double>> old(static_cast<std::size_t>(n_));
    for (int it = 1; it <= in_.max_iterations; ++it) {
        for (int c = 0; c < n_; ++c) {
            old[c] = w_.data(c + 1);
        }
        if (coupled_) {
            compute_sources();
            compute_prefix();
        }
        for (int phase = 0; phase < 2; ++phase) {
            if (phase == 1) {
                boundary_phase();
            }
            for (int c = 0; c < n_; ++c) {
                for (int l = 0; l < levels; ++l) {
                    for (int p = 0; p < grids_[c]->size(); ++p) {
                        if (region(c, flat(c, l, p)) == sidx) {
                            update_node(c, l, p, phase == 1);
                        }
                    }
                }
            }
        }
        double max_diff = 0.0;
        double max_val = 0.0;
        double weighted_diff = kNegInf;
        double weighted_norm = kNegInf;
        for (int c = 0; c < n_; ++c) {
            const auto& now = w_.data(c + 1);
            for (std::size_t idx = 0; idx < now.size(); ++idx) {
                if (region(c, idx) != sidx) {
                    continue;
                }
                const double diff = std::abs(now[idx] - old[c][idx]);
                const double val = std::abs(now[idx]);
                max_diff = std::max(max_diff, diff);
                max_val = std::max(max_val, val);
                const double wexp = L * psi_[c][idx];
                if (diff > 0.0) {
                    weighted_diff = std::max(weighted_diff, std::log(diff) + wexp);
                }
                if (val > 0.0) {
                    weighted_norm = std::max(weighted_norm, std::log(val) + wexp);
                }
            }
        }
        part.iterations = it;
        part.differences.push_back(max_val > 0.0 ? max_diff / max_val : max_diff);
        if (!coupled_) {
            part.converged = true;
            break;
        }
        if (it > 1 && prev_weighted > kNegInf && prev_weighted - prev_weighted_norm > std::log(1e-12)) {
            const double ratio = weighted_diff == kNegInf ? 0.0 : std::exp(weighted_diff - prev_weighted);
            part.contraction_estimates.push_back(ratio);
            bad_streak = ratio >= 1.0 ? bad_streak + 1 : 0;
        }
        prev_weighted = weighted_diff;
        prev_weighted_norm = weighted_norm;
        if (max_diff <= in_.tolerance * max_val || max_val == 0.0) {
            part.converged = true;
            break;
        }
        if (bad_streak >= 5) {
            break;
        }
    }
    return part;
}

PicardReport Engine::run() {
    PicardReport overall;
    overall.label = "total";
    overall.converged = true;
    const double gain = in_.rule ? std::max(1.0, in_.rule->gain()) : 1.0;
    double lambda_min = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n_; ++i) {
        for (int s = 0; s <= 32; ++s) {
            lambda_min = std::min(lambda_min, spec_.lambda(i, s / 32.0));
        }
    }
    const double c_est = n_ * fmax_ * gain * std::max(1.0, 1.0 / lambda_min);

    if (in_.initial_iterate != nullptr) {
        for (int c = 0; c < n_; ++c) {
            w_.data(c + 1) = in_.initial_iterate->data(c + 1);
        }
    }
    if (!coupled_ && in_.source) {
        compute_sources();
        compute_prefix();
    }
    psi_.assign(static_cast<std::size_t>(n_), {});

    // Subsets are solved in order. Cross-component interpolation near a subset
    // interface can read nodes of a later subset, so the sequence is repeated
    // until a whole pass leaves the field unchanged.
    const int subsets = static_cast<int>(in_.subsets.size());
    const int max_passes = (subsets > 1 && coupled_) ? kMaxPasses : 1;
    std::vector<std::vector<double>> start(static_cast<std::size_t>(n_));
    for (int pass = 1; pass <= max_passes; ++pass) {
        for (int c = 0; c < n_; ++c) {
            start[c] = w_.data(c + 1);
        }
        for (int sidx = 0; sidx < subsets; ++sidx) {
            PicardReport part = run_subset(sidx, c_est);
            if (pass > 1) {
                part.label += " (pass " + std::to_string(pass) + ")";
            }
            overall.iterations += part.iterations;
            overall.weight_L = std::max(overall.weight_L, part.weight_L);
            const bool ok = part.converged;
            const std::string label = part.label;
            overall.parts.push_back(std::move(part));
            if (!ok) {
                overall.converged = false;
                const auto& est = overall.parts.back().contraction_estimates;
                const bool diverged = est.size() >= 5 &&
                                      std::all_of(est.end() - 5, est.end(), [](double r) { return r >= 1.0; });
                throw SolverError(diverged ? "Picard iteration diverges on " + label +
                                                 " (contraction estimate >= 1 five times in a row)"
                                           : "Picard iteration did not converge on " + label + " within " +
                                                 std::to_string(in_.max_iterations) + " iterations",
                                  overall);
            }
        }
        double diff = 0.0;
        double norm = 0.0;
        for (int c = 0; c < n_; ++c) {
            const auto& now = w_.data(c + 1);
            for (std::size_t idx = 0; idx < now.size(); ++idx) {
                diff = std::max(diff, std::abs(now[idx] - start[c][idx]));
                norm = std::max(norm, std::abs(now[idx]));
            }
        }
        overall.differences.push_back(norm > 0.0 ? diff / norm : diff);
        if (pass > 1 && diff <= 10.0 * in_.tolerance * norm) {
            break;
        }
        if (pass == max_passes && max_passes > 1) {
            overall.converged = false;
            throw SolverError("subdomain passes did not settle within " + std::to_string(kMaxPasses) + " passes",
                              overall);
        }
    }
    for (const auto& part : overall.parts) {
        overall.contraction_estimates.insert(overall.contraction_estimates.end(), part.contraction_estimates.begin(),
                                             part.contraction_estimates.end());
    }
    return overall;
}

}  // namespace

PicardReport run_engine(const EngineInput& input, SolutionField& w) {
    Engine engine(input, w);
    return engine.run();
}

}  // namespace hyperctrl::detail
