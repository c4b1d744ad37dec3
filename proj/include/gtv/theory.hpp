#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gtv/covariance.hpp"
#include "gtv/graph.hpp"
#include "gtv/solver.hpp"
#include "gtv/synth.hpp"
#include "gtv/types.hpp"

namespace gtv {

/// Number of entries of Gamma * beta with magnitude above `tol`.
inline Index gamma_l0(const IncidenceSystem& sys, const Vector& beta, double tol = 1e-12) {
    const Vector gb = sys.gamma * beta;
    return static_cast<Index>((gb.array().abs() > tol).count());
}

inline double gamma_l1(const IncidenceSystem& sys, const Vector& beta) { return (sys.gamma * beta).lpNorm<1>(); }

inline double laplacian_inf(const IncidenceSystem& sys, const Vector& beta) {
    if (beta.size() == 0) return 0.0;
    // Through Gamma^T (Gamma beta) so component-constant beta gives exactly 0.
    return (sys.gamma.transpose() * (sys.gamma * beta)).lpNorm<Eigen::Infinity>();
}

/// Every scalar that enters the finite-sample bounds.
struct TheoryInputs {
    Index n = 1;
    Index p = 1;
    double sigma = 0.0;  // noise standard deviation
    double c_u = 1.0;
    double c_l = 1.0;
    double lambda_tv = 0.0;
    double lambda_s = 0.0;
    Index beta_l0 = 0;
    Index gamma_beta_l0 = 0;
    double gamma_beta_l1 = 0.0;
    double l_beta_inf = 0.0;
    double sigma_l11 = 0.0;   // ||Sigma_hat||_{1,1}
    double lambda_min = 1.0;  // lambda_min(Sigma + lambda_s L)
    std::vector<Index> block_sizes;
    std::vector<std::optional<double>> mu;  // absent for singleton blocks

    Index K() const { return static_cast<Index>(block_sizes.size()); }

    void validate() const {
        detail::require(n >= 1 && p >= 1, "theory: n and p must be >= 1");
        detail::require(sigma >= 0.0 && std::isfinite(sigma), "theory: sigma must be finite and >= 0");
        detail::require(c_u > 0.0 && c_l > 0.0 && std::isfinite(c_u) && std::isfinite(c_l),
                        "theory: c_u and c_l must be positive");
        detail::require(lambda_tv >= 0.0 && lambda_s >= 0.0, "theory: penalties must be >= 0");
        detail::require(std::isfinite(gamma_beta_l1) && std::isfinite(l_beta_inf) && std::isfinite(sigma_l11) &&
                            std::isfinite(lambda_min),
                        "theory: inputs must be finite");
        detail::require(block_sizes.size() == mu.size(), "theory: block sizes and mu must align");
    }
};

/// max_k {1/|B_k| + 2/(1 + mu_k lambda_tv^2)}, singletons with mu = 0.
inline double rho_sq_line(const TheoryInputs& in) {
    double worst = 0.0;
    for (std::size_t k = 0; k < in.block_sizes.size(); ++k) {
        const double mu = in.mu[k].value_or(0.0);
        worst = std::max(worst, 1.0 / static_cast<double>(in.block_sizes[k]) +
                                    2.0 / (1.0 + mu * in.lambda_tv * in.lambda_tv));
    }
    return worst;
}

/// 48 sqrt(sigma^2 c_u log p / n * rho_sq) + 8 lambda_s ||L beta*||_inf
inline double lambda1_floor(const TheoryInputs& in, double rho_sq) {
    in.validate();
    const double lp = std::log(static_cast<double>(in.p));
    return 48.0 * std::sqrt(in.sigma * in.sigma * in.c_u * lp / static_cast<double>(in.n) * rho_sq) +
           8.0 * in.lambda_s * in.l_beta_inf;
}

inline double lambda1_floor(const TheoryInputs& in) { return lambda1_floor(in, rho_sq_line(in)); }

namespace detail {

inline void require_curvature(double lambda_min) {
    if (!(lambda_min > 0.0))
        throw invalid_input("lambda_min(Sigma + lambda_s L) = " + std::to_string(lambda_min) + " is not positive");
}

inline double alignment_term(const TheoryInputs& in, double lambda_1, double l11_factor, double scale) {
    const double a = scale * lambda_1 * lambda_1 * in.lambda_tv * in.lambda_tv * l11_factor *
                     static_cast<double>(in.gamma_beta_l0);
    const double b = scale * lambda_1 * in.lambda_tv * in.gamma_beta_l1;
    return std::min(a, b);
}

}  // namespace detail

/// MSE bound with the absolute constant set to 1:
///   (l1^2 ||b*||_0 + min(l1^2 ltv^2 ||S||_11 ||G b*||_0, l1 ltv ||G b*||_1)) / min(lmin^2, lmin)
inline double mse_bound_general(const TheoryInputs& in, double lambda_1) {
    in.validate();
    detail::require(lambda_1 >= 0.0, "lambda_1 must be >= 0");
    detail::require_curvature(in.lambda_min);
    const double num = lambda_1 * lambda_1 * static_cast<double>(in.beta_l0) +
                       detail::alignment_term(in, lambda_1, in.sigma_l11, 1.0);
    return num / std::min(in.lambda_min * in.lambda_min, in.lambda_min);
}

/// Family form: ||Sigma_hat||_{1,1} drops out and lambda_min is the family's lower line.
inline double mse_bound_simplified(const TheoryInputs& in, double lambda_1, double lambda_min_line) {
    in.validate();
    detail::require_curvature(lambda_min_line);
    const double num =
        lambda_1 * lambda_1 * static_cast<double>(in.beta_l0) + detail::alignment_term(in, lambda_1, 1.0, 1.0);
    return num / std::min(lambda_min_line * lambda_min_line, lambda_min_line);
}

/// l1^2 ||b*||_0 / lmin + min(2 l1^2 ltv^2 ||S||_11 ||G b*||_0, 2 l1 ltv ||G b*||_1)
inline double prediction_bound(const TheoryInputs& in, double lambda_1) {
    in.validate();
    detail::require(lambda_1 >= 0.0, "lambda_1 must be >= 0");
    detail::require_curvature(in.lambda_min);
    return lambda_1 * lambda_1 * static_cast<double>(in.beta_l0) / in.lambda_min +
           detail::alignment_term(in, lambda_1, in.sigma_l11, 2.0);
}

enum class GraphFamily { generic, block, chain, lattice };

inline const char* to_string(GraphFamily f) {
    switch (f) {
        case GraphFamily::generic: return "generic";
        case GraphFamily::block: return "block";
        case GraphFamily::chain: return "chain";
        case GraphFamily::lattice: return "lattice";
    }
    return "unknown";
}

struct TheoryReport {
    GraphFamily graph_family = GraphFamily::generic;
    TheoryInputs inputs;
    double lambda_1 = 0.0;
    double rho_exact = 0.0;
    double rho_bound = 0.0;
    double kT_inv_bound = 0.0;  // T = supp(Gamma_tilde beta*); 0 when T is empty
    double min_eig_exact = 0.0;
    double min_eig_lower = 0.0;
    double lambda1_floor = 0.0;
    double mse_bound = 0.0;
    double prediction_bound = 0.0;
    // lambda_1^2 |T| / (k_T^2 lambda_min^2) with k_T replaced by its bound
    double consistency_proviso = 0.0;
    bool lambda1_below_floor = false;
    // lambda_1 lambda_tv ||Gamma beta*||_1 <= 1, required by the family statements
    bool alignment_condition = true;
};

/// Inputs from a covariance instance. `sigma` supplies c_u, c_l and the
/// curvature; `sigma_hat` the graph and ||Sigma_hat||_{1,1}.
inline TheoryInputs theory_inputs(const Matrix& sigma, const Matrix& sigma_hat, const Vector& beta_star, Index n,
                                  double noise_sd, double lambda_tv, double lambda_s,
                                  std::optional<double> c_u = std::nullopt, std::optional<double> c_l = std::nullopt) {
    detail::require(sigma.rows() == sigma_hat.rows() && sigma.cols() == sigma_hat.cols(),
                    "theory: Sigma and Sigma_hat sizes differ");
    detail::require(beta_star.size() == sigma.rows(), "theory: beta* length must match Sigma");
    const auto graph = build_graph(sigma_hat);
    const auto sys = incidence(graph, lambda_tv);
    const auto blocks = components(graph);
    const auto auto_in = assumption_inputs_from(sigma);

    TheoryInputs in;
    in.n = n;
    in.p = sigma.rows();
    in.sigma = noise_sd;
    in.c_u = c_u.value_or(auto_in.c_u);
    in.c_l = c_l.value_or(auto_in.c_l);
    in.lambda_tv = lambda_tv;
    in.lambda_s = lambda_s;
    in.beta_l0 = static_cast<Index>(support_of(beta_star, 0.0).size());
    in.gamma_beta_l0 = gamma_l0(sys, beta_star);
    in.gamma_beta_l1 = gamma_l1(sys, beta_star);
    in.l_beta_inf = laplacian_inf(sys, beta_star);
    in.sigma_l11 = sigma_hat.cwiseAbs().rowwise().sum().maxCoeff();
    in.lambda_min = min_eig(sigma, sys.laplacian, lambda_s, in.c_l).exact;
    for (std::size_t k = 0; k < blocks.count(); ++k) {
        in.block_sizes.push_back(blocks.size(k));
        in.mu.push_back(blocks.mu[k]);
    }
    in.validate();
    return in;
}

namespace detail {

inline void fill_common(TheoryReport& rep, const IncidenceSystem& sys, std::optional<double> lambda_1) {
    const auto& in = rep.inputs;
    rep.lambda_1 = lambda_1.value_or(rep.lambda1_floor);
    rep.lambda1_below_floor = rep.lambda_1 < rep.lambda1_floor;
    rep.alignment_condition = rep.lambda_1 * in.lambda_tv * in.gamma_beta_l1 <= 1.0;
    rep.rho_exact = gtv::rho_exact(sys);
    rep.prediction_bound = gtv::prediction_bound(in, rep.lambda_1);
    // Edge rows of T only exist when they carry weight in the stacked operator.
    const Index t1 = in.lambda_tv > 0.0 ? in.gamma_beta_l0 : 0;
    const Index t2 = in.beta_l0;
    if (t1 + t2 > 0) {
        rep.kT_inv_bound = kt_inv_bound(t1, t2, in.sigma_l11, in.lambda_tv);
        rep.consistency_proviso = rep.lambda_1 * rep.lambda_1 * static_cast<double>(t1 + t2) * rep.kT_inv_bound *
                                  rep.kT_inv_bound / (in.lambda_min * in.lambda_min);
    }
}

}  // namespace detail

/// Generic report: component-wise rho bound, diagonal-dominance eigenvalue floor,
/// general MSE bound. lambda_1 defaults to the floor.
inline TheoryReport theory_report(const Matrix& sigma, const Matrix& sigma_hat, const Vector& beta_star, Index n,
                                  double noise_sd, double lambda_tv, double lambda_s,
                                  std::optional<double> lambda_1 = std::nullopt,
                                  std::optional<double> c_u = std::nullopt, std::optional<double> c_l = std::nullopt) {
    TheoryReport rep;
    rep.graph_family = GraphFamily::generic;
    rep.inputs = theory_inputs(sigma, sigma_hat, beta_star, n, noise_sd, lambda_tv, lambda_s, c_u, c_l);
    const auto sys = incidence(build_graph(sigma_hat), lambda_tv);
    rep.rho_bound = std::sqrt(rho_sq_line(rep.inputs));
    const auto me = min_eig(sigma, sys.laplacian, lambda_s, rep.inputs.c_l);
    rep.min_eig_exact = me.exact;
    rep.min_eig_lower = me.lower_bound;
    rep.lambda1_floor = gtv::lambda1_floor(rep.inputs);
    detail::fill_common(rep, sys, lambda_1);
    rep.mse_bound = mse_bound_general(rep.inputs, rep.lambda_1);
    return rep;
}

/// Closed-form rho line of a family.
inline double family_rho_line(const Scenario& sc, double lambda_tv) {
    const double p = static_cast<double>(sc.p), r = sc.r, l = lambda_tv;
    switch (sc.family) {
        case Family::block:
            return std::sqrt(static_cast<double>(sc.K) / p + 2.0 / (1.0 + r * l * l));
        case Family::chain:
            return std::sqrt(1.0 / p + 2.0 * std::numbers::pi / (r * l + 1.0));
        case Family::lattice:
            return std::sqrt(1.0 / p + 5.0 * std::numbers::pi * std::log(2.0 + r * l) / (r * r * l * l + 1.0) +
                             10.0 * std::numbers::pi / (r * l * std::sqrt(p) + 1.0));
    }
    return 0.0;
}

/// Closed-form lower line on lambda_min(Sigma + lambda_s L) of a family.
inline double family_min_eig_line(const Scenario& sc, double lambda_s) {
    const double r = sc.r;
    switch (sc.family) {
        case Family::block:
            return (1.0 - lambda_s) * (1.0 - r) * static_cast<double>(sc.K) / static_cast<double>(sc.p) + lambda_s * r;
        case Family::chain: return (1.0 - lambda_s) * (1.0 - 2.0 * r) + lambda_s;
        case Family::lattice: return (1.0 - lambda_s) * (1.0 - 4.0 * r) + lambda_s;
    }
    return 0.0;
}

/// Family report built on the population covariance of `sc` (Sigma_hat = Sigma)
/// and the scenario's beta*. Bounds use the family's closed-form lines; the
/// exact rho and lambda_min are computed alongside for comparison.
inline TheoryReport mse_bound_family(const Scenario& sc, double lambda_tv, double lambda_s,
                                     std::optional<double> lambda_1 = std::nullopt) {
    sc.validate();
    detail::require(lambda_s >= 0.0 && lambda_s <= 1.0, "family bounds need lambda_s in [0, 1]");
    detail::require(lambda_tv >= 0.0 && std::isfinite(lambda_tv), "lambda_tv must be finite and >= 0");
    const Matrix sigma = make_covariance(sc).matrix;
    const Vector beta = make_beta(sc).beta;

    TheoryReport rep;
    rep.graph_family = sc.family == Family::block   ? GraphFamily::block
                       : sc.family == Family::chain ? GraphFamily::chain
                                                    : GraphFamily::lattice;
    rep.inputs = theory_inputs(sigma, sigma, beta, sc.n, sc.sigma_noise, lambda_tv, lambda_s);
    const auto sys = incidence(build_graph(sigma), lambda_tv);
    rep.rho_bound = family_rho_line(sc, lambda_tv);
    rep.min_eig_exact = rep.inputs.lambda_min;
    rep.min_eig_lower = family_min_eig_line(sc, lambda_s);
    rep.lambda1_floor = gtv::lambda1_floor(rep.inputs, rep.rho_bound * rep.rho_bound);
    detail::fill_common(rep, sys, lambda_1);
    rep.mse_bound = mse_bound_simplified(rep.inputs, rep.lambda_1, rep.min_eig_lower);
    return rep;
}

}  // namespace gtv
