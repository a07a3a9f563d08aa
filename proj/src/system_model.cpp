#include "hyperctrl/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hyperctrl/errors.hpp"
#include "hyperctrl/quadrature.hpp"

namespace hyperctrl {

double Speed::closed_travel(double) const {
    throw PreconditionError("speed has no closed-form travel coordinate");
}

double Speed::closed_travel_inverse(double) const {
    throw PreconditionError("speed has no closed-form travel coordinate");
}

namespace {

class ConstantSpeed final : public Speed {
public:
    explicit ConstantSpeed(double v) : v_(v) {}
    bool is_constant() const override { return true; }
    bool has_closed_travel() const override { return true; }
    double closed_travel(double x) const override { return x / v_; }
    double closed_travel_inverse(double y) const override { return y * v_; }
    nlohmann::json to_json() const override { return {{"kind", "const"}, {"value", v_}}; }

protected:
    double eval(double) const override { return v_; }
    double deriv(double) const override { return 0.0; }

private:
    double v_;
};

class AffineSpeed final : public Speed {
public:
    AffineSpeed(double a, double b) : a_(a), b_(b) {}
    bool is_constant() const override { return b_ == 0.0; }
    bool has_closed_travel() const override { return true; }
    // Outside [0, 1] the speed is constant, so the coordinate continues linearly.
    double closed_travel(double x) const override {
        if (x < 0.0) {
            return x / a_;
        }
        if (x > 1.0) {
            return inside(1.0) + (x - 1.0) / (a_ + b_);
        }
        return inside(x);
    }
    double closed_travel_inverse(double y) const override {
        if (y < 0.0) {
            return y * a_;
        }
        const double y1 = inside(1.0);
        if (y > y1) {
            return 1.0 + (y - y1) * (a_ + b_);
        }
        if (std::abs(b_) < 1e-14 * std::abs(a_)) {
            return y * a_;
        }
        return a_ * std::expm1(b_ * y) / b_;
    }
    nlohmann::json to_json() const override { return {{"kind", "affine"}, {"a", a_}, {"b", b_}}; }

protected:
    double eval(double x) const override { return a_ + b_ * x; }
    double deriv(double) const override { return b_; }

private:
    double inside(double x) const {
        if (std::abs(b_) < 1e-14 * std::abs(a_)) {
            return x / a_;
        }
        return std::log1p(b_ * x / a_) / b_;
    }
    double a_;
    double b_;
};

class GridSpeed final : public Speed {
public:
    GridSpeed(std::vector<double> x, std::vector<double> v) : x_(std::move(x)), v_(std::move(v)) {
        const std::size_t n = x_.size();
        if (n < 2 || v_.size() != n) {
            throw ConfigError("grid speed needs at least two (x, v) samples of equal length");
        }
        for (std::size_t i = 1; i < n; ++i) {
            if (!(x_[i] > x_[i - 1])) {
                throw ConfigError("grid speed abscissae must be strictly increasing");
            }
        }
        if (x_.front() > 0.0 || x_.back() < 1.0) {
            throw ConfigError("grid speed samples must cover [0, 1]");
        }
        // Natural cubic spline second derivatives (tridiagonal solve).
        m_.assign(n, 0.0);
        if (n > 2) {
            std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
            for (std::size_t i = 1; i + 1 < n; ++i) {
                const double h0 = x_[i] - x_[i - 1];
                const double h1 = x_[i + 1] - x_[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((v_[i + 1] - v_[i]) / h1 - (v_[i] - v_[i - 1]) / h0);
            }
            for (std::size_t i = 2; i + 1 < n; ++i) {
                const double h0 = x_[i] - x_[i - 1];
                const double factor = h0 / diag[i - 1];
                diag[i] -= factor * upper[i - 1];
                rhs[i] -= factor * rhs[i - 1];
            }
            for (std::size_t i = n - 2; i >= 1; --i) {
                m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
            }
        }
    }
    nlohmann::json to_json() const override { return {{"kind", "grid"}, {"x", x_}, {"v", v_}}; }
    double max_second_derivative() const {
        double out = 0.0;
        for (double mm : m_) {
            out = std::max(out, std::abs(mm));
        }
        return out;
    }

protected:
    double eval(double x) const override {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h;
        const double b = (x - x_[i]) / h;
        return a * v_[i] + b * v_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }
    double deriv(double x) const override {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h;
        const double b = (x - x_[i]) / h;
        return (v_[i + 1] - v_[i]) / h - (3.0 * a * a - 1.0) * h * m_[i] / 6.0 + (3.0 * b * b - 1.0) * h * m_[i + 1] / 6.0;
    }

private:
    std::size_t segment(double x) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = (it == x_.begin()) ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        return std::min(i, x_.size() - 2);
    }
    std::vector<double> x_;
    std::vector<double> v_;
    std::vector<double> m_;
};

class FunctionSpeed final : public Speed {
public:
    FunctionSpeed(std::function<double(double)> value, std::function<double(double)> derivative, std::string label)
        : value_(std::move(value)), derivative_(std::move(derivative)), label_(std::move(label)) {}
    nlohmann::json to_json() const override { return {{"kind", "function"}, {"label", label_}}; }

protected:
    double eval(double x) const override { return value_(x); }
    double deriv(double x) const override { return derivative_(x); }

private:
    std::function<double(double)> value_;
    std::function<double(double)> derivative_;
    std::string label_;
};

class ZeroCoupling final : public Coupling {
public:
    explicit ZeroCoupling(int n) : n_(n) {}
    int dim() const override { return n_; }
    void eval(double, double, double* out) const override { std::fill(out, out + n_ * n_, 0.0); }
    const std::vector<std::pair<int, int>>& pattern() const override { return pattern_; }
    bool time_independent() const override { return true; }
    nlohmann::json to_json() const override { return {{"kind", "zero"}}; }

private:
    int n_;
    std::vector<std::pair<int, int>> pattern_;
};

class PolynomialCoupling final : public Coupling {
public:
    PolynomialCoupling(int n, std::vector<PolynomialEntry> entries) : n_(n), entries_(std::move(entries)) {
        for (const auto& e : entries_) {
            if (e.row < 0 || e.row >= n_ || e.col < 0 || e.col >= n_) {
                throw ConfigError("polynomial coupling entry index out of range");
            }
            pattern_.emplace_back(e.row, e.col);
            for (std::size_t r = 1; r < e.coeffs.size(); ++r) {
                for (double c : e.coeffs[r]) {
                    if (c != 0.0) {
                        time_dependent_ = true;
                    }
                }
            }
        }
    }
    int dim() const override { return n_; }
    void eval(double t, double x, double* out) const override {
        std::fill(out, out + n_ * n_, 0.0);
        for (const auto& e : entries_) {
            double value = 0.0;
            double tp = 1.0;
            for (const auto& row : e.coeffs) {
                double xp = 1.0;
                for (double c : row) {
                    value += c * tp * xp;
                    xp *= x;
                }
                tp *= t;
            }
            out[e.row * n_ + e.col] += value;
        }
    }
    const std::vector<std::pair<int, int>>& pattern() const override { return pattern_; }
    bool time_independent() const override { return !time_dependent_; }
    nlohmann::json to_json() const override {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& e : entries_) {
            terms.push_back({{"i", e.row + 1}, {"j", e.col + 1}, {"c", e.coeffs}});
        }
        return {{"kind", "closed-form-id"}, {"id", "poly"}, {"terms", terms}};
    }

private:
    int n_;
    std::vector<PolynomialEntry> entries_;
    std::vector<std::pair<int, int>> pattern_;
    bool time_dependent_ = false;
};

class GridCoupling final : public Coupling {
public:
    GridCoupling(int n, std::vector<double> t, std::vector<double> x, std::vector<GridEntry> entries)
        : n_(n), t_(std::move(t)), x_(std::move(x)), entries_(std::move(entries)) {
        if (t_.empty() || x_.empty()) {
            throw ConfigError("grid coupling needs nonempty t and x axes");
        }
        for (const auto& e : entries_) {
            if (e.row < 0 || e.row >= n_ || e.col < 0 || e.col >= n_) {
                throw ConfigError("grid coupling entry index out of range");
            }
            if (e.values.size() != t_.size()) {
                throw ConfigError("grid coupling entry has wrong number of time rows");
            }
            for (const auto& row : e.values) {
                if (row.size() != x_.size()) {
                    throw ConfigError("grid coupling entry has wrong number of x columns");
                }
            }
            pattern_.emplace_back(e.row, e.col);
        }
    }
    int dim() const override { return n_; }
    void eval(double t, double x, double* out) const override {
        std::fill(out, out + n_ * n_, 0.0);
        const auto [ia, ta] = locate(t_, t);
        const auto [ib, tb] = locate(x_, x);
        const std::size_t ia1 = std::min(ia + 1, t_.size() - 1);
        const std::size_t ib1 = std::min(ib + 1, x_.size() - 1);
        for (const auto& e : entries_) {
            const double v = (1 - ta) * ((1 - tb) * e.values[ia][ib] + tb * e.values[ia][ib1]) +
                             ta * ((1 - tb) * e.values[ia1][ib] + tb * e.values[ia1][ib1]);
            out[e.row * n_ + e.col] += v;
        }
    }
    const std::vector<std::pair<int, int>>& pattern() const override { return pattern_; }
    bool time_independent() const override { return t_.size() == 1; }
    nlohmann::json to_json() const override {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& e : entries_) {
            entries.push_back({{"i", e.row + 1}, {"j", e.col + 1}, {"v", e.values}});
        }
        return {{"kind", "grid"}, {"t", t_}, {"x", x_}, {"entries", entries}};
    }

private:
    static std::pair<std::size_t, double> locate(const std::vector<double>& axis, double v) {
        if (axis.size() == 1 || v <= axis.front()) {
            return {0, 0.0};
        }
        if (v >= axis.back()) {
            return {axis.size() - 1, 0.0};
        }
        const auto it = std::upper_bound(axis.begin(), axis.end(), v);
        const std::size_t i = static_cast<std::size_t>(it - axis.begin()) - 1;
        return {i, (v - axis[i]) / (axis[i + 1] - axis[i])};
    }
    int n_;
    std::vector<double> t_;
    std::vector<double> x_;
    std::vector<GridEntry> entries_;
    std::vector<std::pair<int, int>> pattern_;
};

class FunctionCoupling final : public Coupling {
public:
    FunctionCoupling(int n, std::vector<std::pair<int, int>> pattern, std::function<void(double, double, double*)> fn,
                     nlohmann::json description)
        : n_(n), pattern_(std::move(pattern)), fn_(std::move(fn)), description_(std::move(description)) {}
    int dim() const override { return n_; }
    void eval(double t, double x, double* out) const override {
        std::fill(out, out + n_ * n_, 0.0);
        fn_(t, x, out);
    }
    const std::vector<std::pair<int, int>>& pattern() const override { return pattern_; }
    nlohmann::json to_json() const override { return description_; }

private:
    int n_;
    std::vector<std::pair<int, int>> pattern_;
    std::function<void(double, double, double*)> fn_;
    nlohmann::json description_;
};

/** C~_ij(t, x) = -C_{n+1-i, n+1-j}(T - t, x). */
class ReversedCoupling final : public Coupling {
public:
    ReversedCoupling(CouplingPtr base, double T) : base_(std::move(base)), T_(T) {
        const int n = base_->dim();
        for (const auto& [i, j] : base_->pattern()) {
            pattern_.emplace_back(n - 1 - i, n - 1 - j);
        }
    }
    int dim() const override { return base_->dim(); }
    void eval(double t, double x, double* out) const override {
        const int n = base_->dim();
        std::vector<double> buf(static_cast<std::size_t>(n * n));
        base_->eval(T_ - t, x, buf.data());
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                out[i * n + j] = -buf[(n - 1 - i) * n + (n - 1 - j)];
            }
        }
    }
    const std::vector<std::pair<int, int>>& pattern() const override { return pattern_; }
    bool time_independent() const override { return base_->time_independent(); }
    nlohmann::json to_json() const override {
        return {{"kind", "time-reversed"}, {"T", T_}, {"base", base_->to_json()}};
    }

private:
    CouplingPtr base_;
    double T_;
    std::vector<std::pair<int, int>> pattern_;
};

/** diag(0_{s x s}, C): the base coupling shifted by s slots. */
class PaddedCoupling final : public Coupling {
public:
    PaddedCoupling(CouplingPtr base, int shift) : base_(std::move(base)), shift_(shift) {
        for (const auto& [i, j] : base_->pattern()) {
            pattern_.emplace_back(i + shift_, j + shift_);
        }
    }
    int dim() const override { return base_->dim() + shift_; }
    void eval(double t, double x, double* out) const override {
        const int n = dim();
        const int nb = base_->dim();
        std::fill(out, out + n * n, 0.0);
        std::vector<double> buf(static_cast<std::size_t>(nb * nb));
        base_->eval(t, x, buf.data());
        for (int i = 0; i < nb; ++i) {
            for (int j = 0; j < nb; ++j) {
                out[(i + shift_) * n + (j + shift_)] = buf[i * nb + j];
            }
        }
    }
    const std::vector<std::pair<int, int>>& pattern() const override { return pattern_; }
    bool time_independent() const override { return base_->time_independent(); }
    nlohmann::json to_json() const override {
        return {{"kind", "padded"}, {"shift", shift_}, {"base", base_->to_json()}};
    }

private:
    CouplingPtr base_;
    int shift_;
    std::vector<std::pair<int, int>> pattern_;
};

std::string describe(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

SpeedPtr constant_speed(double value) { return std::make_shared<ConstantSpeed>(value); }
SpeedPtr affine_speed(double a, double b) { return std::make_shared<AffineSpeed>(a, b); }
SpeedPtr grid_speed(std::vector<double> x, std::vector<double> v) {
    return std::make_shared<GridSpeed>(std::move(x), std::move(v));
}
SpeedPtr function_speed(std::function<double(double)> value, std::function<double(double)> derivative,
                        std::string label) {
    return std::make_shared<FunctionSpeed>(std::move(value), std::move(derivative), std::move(label));
}

Eigen::MatrixXd Coupling::matrix(double t, double x) const {
    const int n = dim();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(n, n);
    eval(t, x, out.data());
    return out;
}

CouplingPtr zero_coupling(int n) { return std::make_shared<ZeroCoupling>(n); }
CouplingPtr polynomial_coupling(int n, std::vector<PolynomialEntry> entries) {
    return std::make_shared<PolynomialCoupling>(n, std::move(entries));
}
CouplingPtr grid_coupling(int n, std::vector<double> t, std::vector<double> x, std::vector<GridEntry> entries) {
    return std::make_shared<GridCoupling>(n, std::move(t), std::move(x), std::move(entries));
}
CouplingPtr function_coupling(int n, std::vector<std::pair<int, int>> pattern,
                              std::function<void(double, double, double*)> fn, nlohmann::json description) {
    return std::make_shared<FunctionCoupling>(n, std::move(pattern), std::move(fn), std::move(description));
}

double travel_time(const Speed& speed) {
    if (speed.has_closed_travel()) {
        for (int s = 0; s <= 64; ++s) {
            const double x = s / 64.0;
            if (!(speed.value(x) > 0.0)) {
                throw DomainError("non-positive speed sample at x = " + describe(x));
            }
        }
        return speed.closed_travel(1.0);
    }
    return quad::integrate(
        [&](double x) {
            const double v = speed.value(x);
            if (!(v > 0.0)) {
                throw DomainError("non-positive speed sample at x = " + describe(x));
            }
            return 1.0 / v;
        },
        0.0, 1.0, 1e-12);
}

double travel_time(const SystemSpec& spec, int i) { return travel_time(spec.speed(i)); }

SystemSpec::SystemSpec(int k, int m, std::vector<SpeedPtr> speeds, Eigen::MatrixXd B, CouplingPtr coupling)
    : k_(k), m_(m), speeds_(std::move(speeds)), B_(std::move(B)), coupling_(std::move(coupling)) {
    if (k_ < 1 || m_ < 1) {
        throw PreconditionError("SystemSpec: need k >= 1 and m >= 1");
    }
    const int n = k_ + m_;
    if (static_cast<int>(speeds_.size()) != n) {
        throw ConfigError("SystemSpec: expected " + std::to_string(n) + " speeds, got " +
                          std::to_string(speeds_.size()));
    }
    for (int i = 0; i < n; ++i) {
        if (!speeds_[i]) {
            throw ConfigError("SystemSpec: speed " + std::to_string(i + 1) + " is null");
        }
    }
    if (B_.rows() != k_ || B_.cols() != m_) {
        throw ConfigError("SystemSpec: B must be " + std::to_string(k_) + " x " + std::to_string(m_));
    }
    if (!coupling_) {
        coupling_ = zero_coupling(n);
    }
    if (coupling_->dim() != n) {
        throw ConfigError("SystemSpec: coupling dimension does not match n");
    }
    // Ordering -lambda_1 < ... < -lambda_k < 0 < lambda_{k+1} < ... < lambda_{k+m}.
    const int samples = 1024;
    for (int s = 0; s <= samples; ++s) {
        const double x = static_cast<double>(s) / samples;
        for (int i = 0; i < n; ++i) {
            if (!(speeds_[i]->value(x) > 0.0)) {
                throw DomainError("non-positive speed for component " + std::to_string(i + 1) + " at x = " +
                                  describe(x));
            }
        }
        for (int i = 0; i + 1 < k_; ++i) {
            if (!(speeds_[i]->value(x) > speeds_[i + 1]->value(x))) {
                throw DomainError("speed ordering lambda_" + std::to_string(i + 1) + " > lambda_" +
                                  std::to_string(i + 2) + " fails at x = " + describe(x));
            }
        }
        for (int i = k_; i + 1 < n; ++i) {
            if (!(speeds_[i]->value(x) < speeds_[i + 1]->value(x))) {
                throw DomainError("speed ordering lambda_" + std::to_string(i + 1) + " < lambda_" +
                                  std::to_string(i + 2) + " fails at x = " + describe(x));
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        if (const auto* grid = dynamic_cast<const GridSpeed*>(speeds_[i].get())) {
            double scale = 0.0;
            for (int s = 0; s <= 64; ++s) {
                scale = std::max(scale, std::abs(grid->value(s / 64.0)));
            }
            if (grid->max_second_derivative() > 1e4 * scale) {
                warnings_.push_back("grid speed " + std::to_string(i + 1) +
                                    " has a large second derivative; C^2 regularity is doubtful");
            }
        }
    }
    taus_.resize(n);
    for (int i = 0; i < n; ++i) {
        taus_[i] = travel_time(*speeds_[i]);
    }
    t_opt_ = optimal_time(taus_, k_, m_);
}

const Speed& SystemSpec::speed(int i) const { return *speed_ptr(i); }

const SpeedPtr& SystemSpec::speed_ptr(int i) const {
    if (i < 1 || i > n()) {
        throw PreconditionError("component index " + std::to_string(i) + " outside 1.." + std::to_string(n()));
    }
    return speeds_[i - 1];
}

double SystemSpec::sigma(int i, double x) const { return is_minus(i) ? -lambda(i, x) : lambda(i, x); }

double SystemSpec::sigma_prime(int i, double x) const {
    const double d = speed(i).derivative(x);
    return is_minus(i) ? -d : d;
}

bool SystemSpec::constant_speeds() const {
    return std::all_of(speeds_.begin(), speeds_.end(), [](const SpeedPtr& s) { return s->is_constant(); });
}

double SystemSpec::tau(int i) const {
    if (i < 1 || i > n()) {
        throw PreconditionError("component index " + std::to_string(i) + " outside 1.." + std::to_string(n()));
    }
    return taus_[i - 1];
}

Eigen::MatrixXd SystemSpec::Cbold(double t, double x) const {
    Eigen::MatrixXd out = -coupling_->matrix(t, x).transpose();
    for (int i = 1; i <= n(); ++i) {
        out(i - 1, i - 1) += sigma_prime(i, x);
    }
    return out;
}

SystemSpec SystemSpec::with_coupling(CouplingPtr coupling) const {
    return SystemSpec(k_, m_, speeds_, B_, std::move(coupling));
}

nlohmann::json SystemSpec::to_json() const {
    nlohmann::json speeds = nlohmann::json::array();
    for (const auto& s : speeds_) {
        speeds.push_back(s->to_json());
    }
    nlohmann::json B = nlohmann::json::array();
    for (int r = 0; r < B_.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < B_.cols(); ++c) {
            row.push_back(B_(r, c));
        }
        B.push_back(row);
    }
    return {{"k", k_}, {"m", m_}, {"speeds", speeds}, {"B", B}, {"coupling", coupling_->to_json()}};
}

double optimal_time(const std::vector<double>& taus, int k, int m) {
    if (static_cast<int>(taus.size()) != k + m || k < 1 || m < 1) {
        throw PreconditionError("optimal_time: taus must have k + m entries");
    }
    // taus is zero-based: tau_i is taus[i - 1].
    auto tau = [&](int i) { return taus[static_cast<std::size_t>(i - 1)]; };
    double out = 0.0;
    if (m >= k) {
        for (int i = 1; i <= k; ++i) {
            out = std::max(out, tau(i) + tau(m + i));
        }
        out = std::max(out, tau(k + 1));
    } else {
        for (int i = 1; i <= m; ++i) {
            out = std::max(out, tau(k - m + i) + tau(k + i));
        }
    }
    return out;
}

double optimal_time(const SystemSpec& spec) { return optimal_time(spec.taus(), spec.k(), spec.m()); }

bool is_invertible(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) {
        return false;
    }
    if (M.rows() == 0) {
        return true;
    }
    double scale = 1.0;
    for (int r = 0; r < M.rows(); ++r) {
        scale *= M.row(r).norm();
    }
    if (scale == 0.0) {
        return false;
    }
    return std::abs(M.fullPivLu().determinant()) > kInvertTol * scale;
}

bool row_condition(const Eigen::MatrixXd& B, int i) {
    if (i < 1 || i > B.rows() || i > B.cols()) {
        throw PreconditionError("row_condition: block size " + std::to_string(i) + " does not fit B");
    }
    return is_invertible(B.bottomRightCorner(i, i));
}

bool check_B_class(const Eigen::MatrixXd& B, int k, int m, BClass which, int i) {
    if (B.rows() != k || B.cols() != m) {
        throw PreconditionError("check_B_class: B must be k x m");
    }
    switch (which) {
        case BClass::row_condition:
            return row_condition(B, i);
        case BClass::generic: {
            const int top = std::min(k, m - 1);
            for (int r = 1; r <= top; ++r) {
                if (!row_condition(B, r)) {
                    return false;
                }
            }
            return true;
        }
        case BClass::extended: {
            if (m < k) {
                throw PreconditionError("extended B class requires m >= k");
            }
            for (int r = 1; r <= k; ++r) {
                if (!row_condition(B, r)) {
                    return false;
                }
            }
            return true;
        }
    }
    return false;
}

bool check_assumption_B(const Eigen::MatrixXd& B, int k, int m, int ell, double tol) {
    if (ell < 2 || ell > m) {
        throw PreconditionError("check_assumption_B: need 2 <= l <= m, got l = " + std::to_string(ell));
    }
    if (B.rows() != k || B.cols() != m) {
        throw PreconditionError("check_assumption_B: B must be k x m");
    }
    const auto row = B.row(k - 1);
    const double scale = std::max(1.0, row.cwiseAbs().maxCoeff());
    if (std::abs(row(0)) <= tol * scale || std::abs(row(ell - 1)) <= tol * scale) {
        return false;
    }
    for (int j = 2; j <= m; ++j) {
        if (j != ell && std::abs(row(j - 1)) > tol * scale) {
            return false;
        }
    }
    return true;
}

SystemSpec time_reversal_dual_system(const SystemSpec& spec, double T) {
    const int k = spec.k();
    if (spec.m() != k) {
        throw PreconditionError("time reversal requires m = k");
    }
    const int n = spec.n();
    // B~_ij = B_{k+1-i, k+1-j}; the reversed system reflects with B~^{-1}.
    Eigen::MatrixXd reflected(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            reflected(i, j) = spec.B()(k - 1 - i, k - 1 - j);
        }
    }
    if (!is_invertible(reflected)) {
        throw DomainError("time reversal: B is singular");
    }
    const Eigen::MatrixXd Binv = reflected.fullPivLu().inverse();
    std::vector<SpeedPtr> speeds(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        speeds[i - 1] = spec.speed_ptr(n + 1 - i);
    }
    return SystemSpec(k, k, std::move(speeds), Binv, std::make_shared<ReversedCoupling>(spec.coupling_ptr(), T));
}

SystemSpec augment_system(const SystemSpec& spec, double eps) {
    const int k = spec.k();
    const int m = spec.m();
    if (m <= k) {
        throw PreconditionError("augment_system requires m > k");
    }
    if (!(eps > 0.0)) {
        throw PreconditionError("augment_system requires eps > 0");
    }
    const int extra = m - k;
    std::vector<SpeedPtr> speeds;
    for (int j = 1; j <= extra; ++j) {
        speeds.push_back(constant_speed((1.0 + extra - j) / eps));
    }
    for (int i = 1; i <= spec.n(); ++i) {
        speeds.push_back(spec.speed_ptr(i));
    }
    Eigen::MatrixXd Bhat = Eigen::MatrixXd::Zero(m, m);
    Bhat.topLeftCorner(extra, extra).setIdentity();
    Bhat.bottomRows(k) = spec.B();
    return SystemSpec(m, m, std::move(speeds), Bhat, std::make_shared<PaddedCoupling>(spec.coupling_ptr(), extra));
}

}  // namespace hyperctrl
