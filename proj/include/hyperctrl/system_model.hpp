#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace hyperctrl {

/**
 * @brief One characteristic speed lambda_i on [0, 1].
 *
 * Values outside [0, 1] use the constant extension lambda(0) / lambda(1), and
 * the derivative is extended by 0.
 */
class Speed {
public:
    virtual ~Speed() = default;
    /** @brief lambda(x) with constant extension. */
    double value(double x) const { return eval(clamp(x)); }
    /** @brief lambda'(x) inside [0, 1], zero outside. */
    double derivative(double x) const { return (x < 0.0 || x > 1.0) ? 0.0 : deriv(x); }
    virtual bool is_constant() const { return false; }
    /** @brief Closed-form travel coordinate int_0^x 1/lambda when available. */
    virtual bool has_closed_travel() const { return false; }
    virtual double closed_travel(double x) const;
    virtual double closed_travel_inverse(double y) const;
    virtual nlohmann::json to_json() const = 0;

protected:
    virtual double eval(double x) const = 0;
    virtual double deriv(double x) const = 0;
    static double clamp(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }
};

using SpeedPtr = std::shared_ptr<const Speed>;

/** @brief lambda(x) = value. */
SpeedPtr constant_speed(double value);
/** @brief lambda(x) = a + b x. */
SpeedPtr affine_speed(double a, double b);
/** @brief Natural cubic spline through grid samples (x strictly increasing, covering [0, 1]). */
SpeedPtr grid_speed(std::vector<double> x, std::vector<double> v);
/** @brief Arbitrary closed-form callable with its derivative. */
SpeedPtr function_speed(std::function<double(double)> value, std::function<double(double)> derivative,
                        std::string label);

/**
 * @brief Coupling matrix field C(t, x).
 *
 * Entries are written row-major into a caller buffer of size n*n; the pattern
 * lists the (row, col) slots (zero-based) that may be nonzero.
 */
class Coupling {
public:
    virtual ~Coupling() = default;
    virtual int dim() const = 0;
    virtual void eval(double t, double x, double* out) const = 0;
    virtual const std::vector<std::pair<int, int>>& pattern() const = 0;
    virtual bool time_independent() const { return false; }
    virtual nlohmann::json to_json() const = 0;

    bool is_zero() const { return pattern().empty(); }
    Eigen::MatrixXd matrix(double t, double x) const;
};

using CouplingPtr = std::shared_ptr<const Coupling>;

/** @brief C == 0. */
CouplingPtr zero_coupling(int n);

/** @brief One polynomial entry: C_ij(t, x) = sum_rs c[r][s] t^r x^s (zero-based i, j). */
struct PolynomialEntry {
    int row = 0;
    int col = 0;
    std::vector<std::vector<double>> coeffs;
};

/** @brief Entries polynomial in (t, x); analytic in time. */
CouplingPtr polynomial_coupling(int n, std::vector<PolynomialEntry> entries);

/** @brief One grid-sampled entry: values[a][b] at (t[a], x[b]). */
struct GridEntry {
    int row = 0;
    int col = 0;
    std::vector<std::vector<double>> values;
};

/** @brief Bilinear interpolation of sampled entries, constant extension outside the sample box. */
CouplingPtr grid_coupling(int n, std::vector<double> t, std::vector<double> x, std::vector<GridEntry> entries);

/** @brief Arbitrary callable writing the full matrix, with a declared pattern. */
CouplingPtr function_coupling(int n, std::vector<std::pair<int, int>> pattern,
                              std::function<void(double, double, double*)> fn, nlohmann::json description);

/**
 * @brief The control system (k, m, Sigma, C, B) with its derived time constants.
 *
 * Components are numbered 1..n in this interface: 1..k move with speed +lambda_i
 * (the "minus" block), k+1..k+m move with speed -lambda_i (the "plus" block).
 */
class SystemSpec {
public:
    SystemSpec(int k, int m, std::vector<SpeedPtr> speeds, Eigen::MatrixXd B, CouplingPtr coupling);

    int k() const { return k_; }
    int m() const { return m_; }
    int n() const { return k_ + m_; }
    bool is_minus(int i) const { return i <= k_; }

    const Speed& speed(int i) const;
    const SpeedPtr& speed_ptr(int i) const;
    double lambda(int i, double x) const { return speed(i).value(x); }
    /** @brief Signed diagonal entry of Sigma: -lambda_i for i <= k, +lambda_i otherwise. */
    double sigma(int i, double x) const;
    double sigma_prime(int i, double x) const;
    bool constant_speeds() const;

    double tau(int i) const;
    const std::vector<double>& taus() const { return taus_; }
    double t_opt() const { return t_opt_; }
    double t_russell() const { return taus_[k_ - 1] + taus_[k_]; }

    const Eigen::MatrixXd& B() const { return B_; }
    const Coupling& coupling() const { return *coupling_; }
    const CouplingPtr& coupling_ptr() const { return coupling_; }
    Eigen::MatrixXd C(double t, double x) const { return coupling_->matrix(t, x); }
    /** @brief Sigma'(x) - C(t, x)^T, the coefficient of the dual system. */
    Eigen::MatrixXd Cbold(double t, double x) const;

    SystemSpec with_coupling(CouplingPtr coupling) const;
    /** @brief Advisory messages collected during validation (for example a rough grid speed). */
    const std::vector<std::string>& warnings() const { return warnings_; }
    nlohmann::json to_json() const;

private:
    int k_;
    int m_;
    std::vector<SpeedPtr> speeds_;
    Eigen::MatrixXd B_;
    CouplingPtr coupling_;
    std::vector<double> taus_;
    double t_opt_ = 0.0;
    std::vector<std::string> warnings_;
};

/** @brief tau_i = int_0^1 1/lambda_i (1-based i). */
double travel_time(const Speed& speed);
double travel_time(const SystemSpec& spec, int i);

/** @brief The optimal time formula on a list of travel times. */
double optimal_time(const std::vector<double>& taus, int k, int m);
double optimal_time(const SystemSpec& spec);

enum class BClass { generic, extended, row_condition };

/** @brief Invertibility of the i x i block formed by the last i rows and columns of B. */
bool row_condition(const Eigen::MatrixXd& B, int i);

/** @brief Class membership; `i` is only used for BClass::row_condition. */
bool check_B_class(const Eigen::MatrixXd& B, int k, int m, BClass which, int i = 0);

/** @brief B_{k,1} != 0, B_{k,l} != 0 and B_{k,j} = 0 for the remaining j >= 2. */
bool check_assumption_B(const Eigen::MatrixXd& B, int k, int m, int ell, double tol = 1e-12);

/** @brief The reversed (m = k) system w~(t, x) = P w(T - t, x), P the order-reversing permutation. */
SystemSpec time_reversal_dual_system(const SystemSpec& spec, double T);

/** @brief The (m, m) system obtained by adding m - k artificial fast minus components. */
SystemSpec augment_system(const SystemSpec& spec, double eps);

/** @brief Relative determinant tolerance used for every invertibility decision. */
inline constexpr double kInvertTol = 1e-10;

/** @brief True when |det M| > kInvertTol * prod of row norms. */
bool is_invertible(const Eigen::MatrixXd& M);

}  // namespace hyperctrl
