#include "lowrank/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lowrank/spectral.hpp"

namespace lowrank {

namespace {

Gate gate_le(std::string name, double value, double limit) {
  return Gate{std::move(name), value, limit, within(value, limit)};
}

Gate gate_lt(std::string name, double value, double limit) {
  return Gate{std::move(name), value, limit, value < limit};
}

Gate gate_ge(std::string name, double value, double limit) {
  return Gate{std::move(name), value, limit, within(limit, value)};
}

Gate gate_true(std::string name, bool ok) {
  return Gate{std::move(name), ok ? 1.0 : 0.0, 1.0, ok};
}

bool all_hold(const std::vector<Gate>& gates) {
  return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.satisfied; });
}

// Builds a check of lhs <= rhs (or lhs >= rhs when `greater` is set).
LemmaCheck make_check(Lemma lemma, std::string inequality, long long t, const std::vector<Gate>& gates,
                      double lhs, double rhs, bool greater = false) {
  LemmaCheck check;
  check.lemma = lemma;
  check.inequality = std::move(inequality);
  check.t = t;
  check.gates = gates;
  check.precondition_satisfied = all_hold(gates);
  check.lhs = lhs;
  check.rhs = rhs;
  if (check.precondition_satisfied) {
    check.inequality_satisfied = greater ? within(rhs, lhs) : within(lhs, rhs);
  }
  return check;
}

double x_norm(const ProblemInstance& inst) { return inst.truth().spectral_norm(); }
double x_min(const ProblemInstance& inst) { return inst.truth().sigma_min(); }

}  // namespace

std::string to_string(Lemma lemma) {
  switch (lemma) {
    case Lemma::kSigmaGrowth:
      return "sigma_growth";
    case Lemma::kNoiseRecursion:
      return "noise_recursion";
    case Lemma::kAngleRecursion:
      return "angle_recursion";
    case Lemma::kNormControl:
      return "norm_control";
    case Lemma::kLocalContraction:
      return "local_contraction";
    case Lemma::kErrorSplit:
      return "error_split";
    case Lemma::kPerturbation:
      return "perturbation";
    case Lemma::kSvdCloseness:
      return "svd_closeness";
    case Lemma::kWeylConsequence:
      return "weyl_consequence";
  }
  return "unknown";
}

Lemma lemma_from_string(const std::string& name) {
  for (Lemma lemma : kAllLemmas) {
    if (to_string(lemma) == name) {
      return lemma;
    }
  }
  throw std::invalid_argument(fmt::format("unknown lemma '{}'", name));
}

void validate(const MonitorConfig& cfg) {
  if (!(cfg.c_small > 0.0) || !std::isfinite(cfg.c_small)) {
    throw std::invalid_argument(fmt::format("c_small must be > 0, got {}", cfg.c_small));
  }
  if (!(cfg.delta_hat >= 0.0)) {
    throw std::invalid_argument("delta_hat must be >= 0");
  }
}

bool within(double lhs, double rhs) {
  if (!std::isfinite(lhs) || !std::isfinite(rhs)) {
    return lhs <= rhs;
  }
  return lhs <= rhs + kComparisonSlack * (std::abs(lhs) + std::abs(rhs));
}

bool is_violation(const LemmaCheck& c) {
  return c.precondition_satisfied && c.inequality_satisfied && !*c.inequality_satisfied;
}

void MonitorReport::add(LemmaCheck check) {
  LemmaTally& tally = tallies[check.lemma];
  ++tally.evaluated;
  if (check.precondition_satisfied) {
    ++tally.applicable;
  }
  const bool violated = is_violation(check);
  if (violated) {
    ++tally.violated;
  }
  if (sink) {
    sink(check);
  }
  if (keep_all || violated) {
    checks.push_back(std::move(check));
  }
}

long long MonitorReport::violations() const {
  long long total = 0;
  for (const auto& [lemma, tally] : tallies) total += tally.violated;
  return total;
}

long long MonitorReport::applicable() const {
  long long total = 0;
  for (const auto& [lemma, tally] : tallies) total += tally.applicable;
  return total;
}

MonitorViolation::MonitorViolation(const LemmaCheck& check)
    : std::runtime_error(fmt::format("{} ({}) violated at t={}: lhs={:.6e} rhs={:.6e}",
                                     to_string(check.lemma), check.inequality, check.t, check.lhs,
                                     check.rhs)),
      check_(check) {}

IterateState make_state(const ProblemInstance& inst, const Matrix& u, long long t) {
  const GroundTruth& truth = inst.truth();
  IterateState s;
  s.t = t;
  s.u = u;
  const Svd svd = thin_svd(u);
  s.sigmas = svd.values;
  const Index k = std::min<Index>(truth.rank(), svd.values.size());
  s.lt = svd.left.leftCols(k);
  s.angle_x_lt = principal_angle(truth.basis, s.lt);
  s.angle_l_lt = principal_angle(inst.spectral_basis(), s.lt);
  s.split = signal_noise_decompose(truth, u);
  s.error = inst.target() - outer(u);
  s.error_spec = spectral_norm(s.error);
  s.error_fro = s.error.norm();
  const Matrix deviation = s.error - inst.op().normal(s.error);
  s.dev_spec = spectral_norm(deviation);
  s.dev_fro = deviation.norm();
  s.vx_error_fro = (truth.basis.transpose() * s.error).norm();
  s.noise_outer_fro = s.split.noise.cols() > 0 ? outer(s.split.noise).norm() : 0.0;
  return s;
}

std::vector<LemmaCheck> monitor_sigma_growth(const IterateState& cur, const IterateState& next,
                                             const ProblemInstance& inst, double mu, const MonitorConfig& cfg) {
  const double xn = x_norm(inst);
  const double xm = x_min(inst);
  const double kappa = inst.truth().kappa;
  const double c = cfg.c_small;
  const std::vector<Gate> gates = {
      gate_le("mu <= c kappa^-2 ||X||^-2", mu, c / (kappa * kappa * xn * xn)),
      gate_le("||U_t|| <= 3||X||", cur.spec_norm(), 3.0 * xn),
      gate_le("angle_X_signal <= c/kappa", cur.split.angle_x_signal, c / kappa),
      gate_le("dev <= c sigma_min(X)^2", cur.dev_spec, c * xm * xm),
      gate_true("V_X^T U_t full rank", !cur.split.rank_deficient),
  };
  const double s = cur.split.sigma_min_vxu;
  const double rhs = s * (1.0 + 0.25 * mu * xm * xm - mu * s * s);
  return {make_check(Lemma::kSigmaGrowth, "sigma_min(V_X^T U_{t+1}) >= growth", cur.t, gates,
                     next.split.sigma_min_vxu, rhs, /*greater=*/true)};
}

std::vector<LemmaCheck> monitor_noise_recursion(const IterateState& cur, const IterateState& next,
                                                const ProblemInstance& inst, double mu, const MonitorConfig& cfg) {
  const double xn = x_norm(inst);
  const double kappa = inst.truth().kappa;
  const double c = cfg.c_small;
  const Matrix projected_next = inst.truth().basis.transpose() * next.u * cur.split.w;
  const double mu_limit = c * std::min(1.0 / (xn * xn), cur.dev_spec > 0.0 ? 1.0 / cur.dev_spec
                                                                           : std::numeric_limits<double>::infinity());
  const double smin = sigma_min(projected_next);
  const double smax = spectral_norm(projected_next);
  const std::vector<Gate> gates = {
      gate_true("r > r_star", cur.split.w_perp.cols() > 0),
      gate_le("mu <= c min(||X||^-2, 1/dev)", mu, mu_limit),
      gate_le("||U_t|| <= 3||X||", cur.spec_norm(), 3.0 * xn),
      gate_true("V_X^T U_{t+1} W_t full rank", smax > 0.0 && smin >= kRankDeficiencyTolerance * next.spec_norm()),
      gate_le("angle_X_signal <= c/kappa", cur.split.angle_x_signal, c / kappa),
  };
  const double noise = cur.split.noise_spec;
  const double factor = 1.0 - 0.5 * mu * noise * noise + 9.0 * mu * cur.split.angle_x_signal * xn * xn +
                        2.0 * mu * cur.dev_spec;
  return {make_check(Lemma::kNoiseRecursion, "||U_{t+1} W_{t+1,perp}|| <= factor ||U_t W_{t,perp}||",
                     cur.t, gates, next.split.noise_spec, factor * noise)};
}

std::vector<LemmaCheck> monitor_angle_recursion(const IterateState& cur, const IterateState& next,
                                                const ProblemInstance& inst, double mu, const MonitorConfig& cfg) {
  const double xn = x_norm(inst);
  const double xm = x_min(inst);
  const double kappa = inst.truth().kappa;
  const double c = cfg.c_small;
  const std::vector<Gate> gates = {
      gate_le("||U_t W_perp|| <= 2 sigma_min(U_t W_t)", cur.split.noise_spec, 2.0 * cur.split.signal_sigma_min),
      gate_le("||U_t|| <= 3||X||", cur.spec_norm(), 3.0 * xn),
      gate_le("dev <= c sigma_min(X)^2", cur.dev_spec, c * xm * xm),
      gate_le("angle_X_signal <= c", cur.split.angle_x_signal, c),
      gate_le("mu <= c kappa^-2 ||X||^-2", mu, c / (kappa * kappa * xn * xn)),
      gate_le("||U_t W_perp|| <= c kappa^-2 ||X||", cur.split.noise_spec, c * xn / (kappa * kappa)),
  };
  const double rhs = (1.0 - 0.25 * mu * xm * xm) * cur.split.angle_x_signal + 100.0 * mu * cur.dev_spec +
                     500.0 * mu * mu * cur.error_spec * cur.error_spec;
  return {make_check(Lemma::kAngleRecursion, "angle_X_signal(t+1) <= recursion", cur.t, gates,
                     next.split.angle_x_signal, rhs)};
}

std::vector<LemmaCheck> monitor_norm_control(const IterateState& cur, const IterateState& next,
                                             const ProblemInstance& inst, double mu, const MonitorConfig&) {
  const double xn = x_norm(inst);
  const std::vector<Gate> gates = {
      gate_le("||U_t|| <= 3||X||", cur.spec_norm(), 3.0 * xn),
      gate_le("mu <= 1/(27||X||^2)", mu, 1.0 / (27.0 * xn * xn)),
      gate_le("dev <= ||X||^2", cur.dev_spec, xn * xn),
  };
  return {make_check(Lemma::kNormControl, "||U_{t+1}|| <= 3||X||", cur.t, gates, next.spec_norm(), 3.0 * xn)};
}

std::vector<LemmaCheck> monitor_local_contraction(const IterateState& cur, const IterateState& next,
                                                  const ProblemInstance& inst, double mu, const MonitorConfig& cfg) {
  const double xn = x_norm(inst);
  const double xm = x_min(inst);
  const double kappa = inst.truth().kappa;
  const double c = cfg.c_small;
  const double k2 = 1.0 / (kappa * kappa);
  const std::vector<Gate> gates = {
      gate_le("||U_t|| <= 3||X||", cur.spec_norm(), 3.0 * xn),
      gate_ge("sigma_min(U_t W_t) >= sigma_min(X)/sqrt(10)", cur.split.signal_sigma_min, xm / std::sqrt(10.0)),
      gate_le("mu <= c kappa^-2 ||X||^-2", mu, c * k2 / (xn * xn)),
      gate_le("angle_X_signal <= c kappa^-2", cur.split.angle_x_signal, c * k2),
      gate_le("max(dev_F, dev) <= c kappa^-2 ||XX^T - UU^T||_F", std::max(cur.dev_fro, cur.dev_spec),
              c * k2 * cur.error_fro),
  };
  const double rhs = (1.0 - mu * xm * xm / 200.0) * cur.vx_error_fro + mu * (xm * xm / 100.0) * cur.noise_outer_fro;
  return {make_check(Lemma::kLocalContraction, "||V_X^T(XX^T - U_{t+1}U_{t+1}^T)||_F <= contraction",
                     cur.t, gates, next.vx_error_fro, rhs)};
}

std::vector<LemmaCheck> monitor_error_split(const IterateState& cur, const GroundTruth& truth,
                                            const MonitorConfig& cfg) {
  const double kappa = truth.kappa;
  const std::vector<Gate> gates = {
      gate_le("||U_t|| <= 3||X||", cur.spec_norm(), 3.0 * truth.spectral_norm()),
      gate_ge("sigma_min(U_t W_t) >= sigma_min(X)/sqrt(10)", cur.split.signal_sigma_min,
              truth.sigma_min() / std::sqrt(10.0)),
      gate_le("angle_X_signal <= c kappa^-2", cur.split.angle_x_signal, cfg.c_small / (kappa * kappa)),
  };
  return {make_check(Lemma::kErrorSplit, "||XX^T - UU^T||_F <= 4||V_X^T(XX^T - UU^T)||_F + ||noise outer||_F",
                     cur.t, gates, cur.error_fro, 4.0 * cur.vx_error_fro + cur.noise_outer_fro)};
}

std::vector<LemmaCheck> monitor_svd_closeness(const IterateState& cur, const GroundTruth& truth) {
  const std::vector<Gate> gates = {gate_le("angle_X_Lt <= 1/8", cur.angle_x_lt, 0.125)};
  const Index rs = truth.rank();
  const double sigma_rs = kth_singular_value(cur.sigmas, rs);
  const double sigma_rs1 = kth_singular_value(cur.sigmas, rs + 1);
  return {
      make_check(Lemma::kSvdCloseness, "sigma_r*(U W) >= sigma_r*(U)/2", cur.t, gates,
                 cur.split.signal_sigma_min, 0.5 * sigma_rs, /*greater=*/true),
      make_check(Lemma::kSvdCloseness, "angle_X_signal <= 7 angle_X_Lt", cur.t, gates,
                 cur.split.angle_x_signal, 7.0 * cur.angle_x_lt),
      make_check(Lemma::kSvdCloseness, "||U W_perp|| <= 2 sigma_{r*+1}(U)", cur.t, gates,
                 cur.split.noise_spec, 2.0 * sigma_rs1),
  };
}

std::vector<LemmaCheck> monitor_perturbation(const IterateState& cur, const SurrogateSide& side) {
  const double signal = side.sigma_rstar_z * side.sigma_min_vlu;
  const double leak = side.sigma_rstar1_z * side.u_norm;
  const std::vector<Gate> gates = {
      gate_lt("sigma_{r*+1}(Z)||U|| + ||E||/alpha < sigma_r*(Z) sigma_min(V_L^T U)",
              leak + side.e_norm / side.alpha, signal),
  };
  const Index rs = cur.lt.cols();
  const double sigma_rs = kth_singular_value(cur.sigmas, rs);
  const double sigma_rs1 = kth_singular_value(cur.sigmas, rs + 1);
  const double lower = side.alpha * signal - side.e_norm;
  const double upper = side.alpha * leak + side.e_norm;
  const double denominator = side.alpha * signal - side.alpha * leak - side.e_norm;
  const double angle_bound = denominator > 0.0 ? upper / denominator : std::numeric_limits<double>::infinity();
  return {
      make_check(Lemma::kPerturbation, "sigma_r*(U_t) >= alpha sigma_r*(Z) sigma_min(V_L^T U) - ||E||",
                 cur.t, gates, sigma_rs, lower, /*greater=*/true),
      make_check(Lemma::kPerturbation, "sigma_{r*+1}(U_t) <= alpha sigma_{r*+1}(Z)||U|| + ||E||", cur.t,
                 gates, sigma_rs1, upper),
      make_check(Lemma::kPerturbation, "angle_L_Lt <= Wedin bound", cur.t, gates, cur.angle_l_lt, angle_bound),
  };
}

std::vector<LemmaCheck> monitor_weyl_consequence(const ProblemInstance& inst) {
  const GroundTruth& truth = inst.truth();
  const Index rs = truth.rank();
  const Vector& lam = inst.m_eigenvalues();
  const Vector gram_eigs = truth.sigmas.array().square();  // nonzero eigenvalues of XX^T
  const double lambda1_x = gram_eigs(0);
  const double lambda_rs_x = gram_eigs(rs - 1);
  const double delta = spectral_norm(inst.m_matrix() - inst.target()) / lambda_rs_x;
  const std::vector<Gate> gates = {gate_lt("delta < 1/2", delta, 0.5)};
  const double lambda_rs1 = rs < lam.size() ? lam(rs) : 0.0;
  return {
      make_check(Lemma::kWeylConsequence, "lambda_1(M) >= (1-delta) lambda_1(XX^T)", 0, gates, lam(0),
                 (1.0 - delta) * lambda1_x, /*greater=*/true),
      make_check(Lemma::kWeylConsequence, "lambda_1(M) <= (1+delta) lambda_1(XX^T)", 0, gates, lam(0),
                 (1.0 + delta) * lambda1_x),
      make_check(Lemma::kWeylConsequence, "lambda_{r*+1}(M) <= delta lambda_r*(XX^T)", 0, gates, lambda_rs1,
                 delta * lambda_rs_x),
      make_check(Lemma::kWeylConsequence, "lambda_r*(M) >= (1-delta) lambda_r*(XX^T)", 0, gates, lam(rs - 1),
                 (1.0 - delta) * lambda_rs_x, /*greater=*/true),
      make_check(Lemma::kWeylConsequence, "||V_{X perp}^T V_L|| <= 2 delta", 0, gates,
                 principal_angle(truth.basis, inst.spectral_basis()), 2.0 * delta),
  };
}

MonitorSuite::MonitorSuite(const ProblemInstance& inst, double mu, double alpha, MonitorConfig cfg,
                           std::function<void(const LemmaCheck&)> sink, bool keep_all)
    : inst_(&inst), mu_(mu), alpha_(alpha), cfg_(std::move(cfg)) {
  validate(cfg_);
  report_.sink = std::move(sink);
  report_.keep_all = keep_all;
  if (enabled(Lemma::kWeylConsequence)) {
    emit(monitor_weyl_consequence(inst));
  }
}

void MonitorSuite::emit(std::vector<LemmaCheck> checks) {
  for (LemmaCheck& c : checks) {
    const bool violated = is_violation(c);
    report_.add(std::move(c));
    if (violated && cfg_.report_mode == ReportMode::kFailOnViolation) {
      throw MonitorViolation(report_.checks.back());
    }
  }
}

void MonitorSuite::observe(long long t, const Matrix& u) {
  const ProblemInstance& inst = *inst_;
  IterateState state = make_state(inst, u, t);

  if (previous_) {
    const IterateState& prev = *previous_;
    if (enabled(Lemma::kSigmaGrowth)) emit(monitor_sigma_growth(prev, state, inst, mu_, cfg_));
    if (enabled(Lemma::kNoiseRecursion)) emit(monitor_noise_recursion(prev, state, inst, mu_, cfg_));
    if (enabled(Lemma::kAngleRecursion)) emit(monitor_angle_recursion(prev, state, inst, mu_, cfg_));
    if (enabled(Lemma::kNormControl)) emit(monitor_norm_control(prev, state, inst, mu_, cfg_));
    if (enabled(Lemma::kLocalContraction)) emit(monitor_local_contraction(prev, state, inst, mu_, cfg_));
  }
  if (enabled(Lemma::kErrorSplit)) emit(monitor_error_split(state, inst.truth(), cfg_));
  if (enabled(Lemma::kSvdCloseness)) emit(monitor_svd_closeness(state, inst.truth()));

  if (enabled(Lemma::kPerturbation)) {
    if (t == 0) {
      tilde_ = u;
      tilde_valid_ = true;
      const Matrix base = u / alpha_;
      u_norm_ = spectral_norm(base);
      sigma_min_vlu_ = sigma_min(inst.spectral_basis().transpose() * base);
    } else if (tilde_valid_) {
      tilde_ = (tilde_ + mu_ * (inst.m_matrix() * tilde_)).eval();
      tilde_valid_ = tilde_.allFinite();
    }
    if (tilde_valid_) {
      const Vector z = surrogate_singular_values(inst.m_eigenvalues(), mu_, t);
      const Index rs = inst.r_star();
      SurrogateSide side;
      side.sigma_rstar_z = kth_singular_value(z, rs);
      side.sigma_rstar1_z = kth_singular_value(z, rs + 1);
      side.u_norm = u_norm_;
      side.sigma_min_vlu = sigma_min_vlu_;
      side.alpha = alpha_;
      side.e_norm = spectral_norm(u - tilde_);
      if (std::isfinite(side.sigma_rstar_z) && std::isfinite(side.e_norm)) {
        emit(monitor_perturbation(state, side));
      } else {
        tilde_valid_ = false;
      }
    }
  }
  previous_ = std::move(state);
}

IterateObserver MonitorSuite::observer() {
  return [this](long long t, const Matrix& u) { observe(t, u); };
}

void to_json(nlohmann::json& j, const LemmaCheck& check) {
  nlohmann::json gates = nlohmann::json::array();
  for (const Gate& g : check.gates) {
    gates.push_back({{"name", g.name}, {"value", g.value}, {"limit", g.limit}, {"satisfied", g.satisfied}});
  }
  j = nlohmann::json{{"lemma", to_string(check.lemma)},
                     {"inequality", check.inequality},
                     {"t", check.t},
                     {"precondition_satisfied", check.precondition_satisfied},
                     {"inequality_satisfied", check.inequality_satisfied ? nlohmann::json(*check.inequality_satisfied)
                                                                        : nlohmann::json("not_applicable")},
                     {"lhs", check.lhs},
                     {"rhs", check.rhs},
                     {"gates", gates}};
}

nlohmann::json summary_json(const MonitorReport& report, const MonitorConfig& cfg) {
  nlohmann::json lemmas = nlohmann::json::object();
  for (const auto& [lemma, tally] : report.summary()) {
    lemmas[to_string(lemma)] = {{"evaluated", tally.evaluated},
                                {"applicable", tally.applicable},
                                {"violated", tally.violated}};
  }
  return nlohmann::json{{"c_small", cfg.c_small},
                        {"delta_hat", cfg.delta_hat},
                        {"violations", report.violations()},
                        {"applicable", report.applicable()},
                        {"lemmas", lemmas}};
}

}  // namespace lowrank
