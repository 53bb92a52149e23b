#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lowrank/diagnostics.hpp"
#include "lowrank/model.hpp"
#include "lowrank/solver.hpp"

namespace lowrank {

/// Trajectory inequalities that can be evaluated along a gradient-descent run.
enum class Lemma {
  kSigmaGrowth,       // sigma_min(V_X^T U_{t+1}) growth
  kNoiseRecursion,    // ||U_{t+1} W_{t+1,perp}|| recursion
  kAngleRecursion,    // ||V_{X perp}^T V_{U_{t+1} W_{t+1}}|| recursion
  kNormControl,       // ||U_{t+1}|| <= 3 ||X||
  kLocalContraction,  // ||V_X^T (XX^T - U_{t+1} U_{t+1}^T)||_F contraction
  kErrorSplit,        // ||XX^T - UU^T||_F <= 4 ||V_X^T(...)||_F + ||noise outer||_F
  kPerturbation,      // singular values / angle of Z_t U_0 + E_t
  kSvdCloseness,      // SVD quantities vs signal/noise quantities
  kWeylConsequence,   // spectrum and subspace of M vs XX^T
};

inline constexpr std::array<Lemma, 9> kAllLemmas = {
    Lemma::kSigmaGrowth,      Lemma::kNoiseRecursion, Lemma::kAngleRecursion,
    Lemma::kNormControl,      Lemma::kLocalContraction, Lemma::kErrorSplit,
    Lemma::kPerturbation,     Lemma::kSvdCloseness,   Lemma::kWeylConsequence};

std::string to_string(Lemma lemma);
Lemma lemma_from_string(const std::string& name);

enum class ReportMode { kLogOnly, kFailOnViolation };

struct MonitorConfig {
  std::set<Lemma> enabled{kAllLemmas.begin(), kAllLemmas.end()};
  /// Single stand-in for the unspecified small absolute constants in the lemma hypotheses.
  double c_small = 0.01;
  /// Sampled RIP estimate (with safety factor); reported alongside, not used by the gates
  /// that concern M, which use the measured ||M - XX^T|| instead.
  double delta_hat = 0.0;
  ReportMode report_mode = ReportMode::kLogOnly;
};

void validate(const MonitorConfig& cfg);

/// One numerically evaluated hypothesis.
struct Gate {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool satisfied = false;
};

/// One inequality of one lemma at one iteration. The inequality is only evaluated
/// when every gate holds.
struct LemmaCheck {
  Lemma lemma = Lemma::kSigmaGrowth;
  std::string inequality;
  long long t = 0;
  bool precondition_satisfied = false;
  std::optional<bool> inequality_satisfied;
  double lhs = 0.0;
  double rhs = 0.0;
  std::vector<Gate> gates;
};

/// Relative slack applied to every comparison to absorb floating-point rounding.
inline constexpr double kComparisonSlack = 1e-12;

/// lhs <= rhs up to kComparisonSlack.
bool within(double lhs, double rhs);

struct LemmaTally {
  long long evaluated = 0;   // checks emitted
  long long applicable = 0;  // gates all satisfied
  long long violated = 0;
};

/// Running tallies. Every check goes to the optional sink; only violations are kept
/// unless keep_all is set.
struct MonitorReport {
  bool keep_all = false;
  std::function<void(const LemmaCheck&)> sink;
  std::vector<LemmaCheck> checks;      // all checks when keep_all, else violations only
  std::map<Lemma, LemmaTally> tallies;

  void add(LemmaCheck check);
  const std::map<Lemma, LemmaTally>& summary() const { return tallies; }
  long long violations() const;
  long long applicable() const;
};

bool is_violation(const LemmaCheck& check);

class MonitorViolation : public std::runtime_error {
 public:
  explicit MonitorViolation(const LemmaCheck& check);
  const LemmaCheck& check() const { return check_; }

 private:
  LemmaCheck check_;
};

/// Everything the monitors need about one iterate.
struct IterateState {
  long long t = 0;
  Matrix u;
  Vector sigmas;          // singular values of U
  Matrix lt;              // top-r* left singular basis of U
  double angle_x_lt = 0.0;
  double angle_l_lt = 0.0;
  SignalNoiseSplit split;
  Matrix error;           // XX^T - UU^T
  double error_spec = 0.0;
  double error_fro = 0.0;
  double dev_spec = 0.0;  // ||(Id - A*A)(XX^T - UU^T)||
  double dev_fro = 0.0;   // ||(Id - A*A)(XX^T - UU^T)||_F
  double vx_error_fro = 0.0;     // ||V_X^T (XX^T - UU^T)||_F
  double noise_outer_fro = 0.0;  // ||U W_perp W_perp^T U^T||_F

  double spec_norm() const { return sigmas.size() > 0 ? sigmas(0) : 0.0; }
};

IterateState make_state(const ProblemInstance& inst, const Matrix& u, long long t);

/// Power-method side of the perturbation lemma at iteration t.
struct SurrogateSide {
  double sigma_rstar_z = 0.0;
  double sigma_rstar1_z = 0.0;
  double u_norm = 0.0;        // ||U||, U = U_0 / alpha
  double sigma_min_vlu = 0.0; // sigma_min(V_L^T U)
  double alpha = 0.0;
  double e_norm = 0.0;        // ||U_t - Z_t U_0||
};

// Step lemmas (U_t -> U_{t+1}).
std::vector<LemmaCheck> monitor_sigma_growth(const IterateState& cur, const IterateState& next,
                                             const ProblemInstance& inst, double mu, const MonitorConfig& cfg);
std::vector<LemmaCheck> monitor_noise_recursion(const IterateState& cur, const IterateState& next,
                                                const ProblemInstance& inst, double mu, const MonitorConfig& cfg);
std::vector<LemmaCheck> monitor_angle_recursion(const IterateState& cur, const IterateState& next,
                                                const ProblemInstance& inst, double mu, const MonitorConfig& cfg);
std::vector<LemmaCheck> monitor_norm_control(const IterateState& cur, const IterateState& next,
                                             const ProblemInstance& inst, double mu, const MonitorConfig& cfg);
std::vector<LemmaCheck> monitor_local_contraction(const IterateState& cur, const IterateState& next,
                                                  const ProblemInstance& inst, double mu, const MonitorConfig& cfg);

// Single-iterate lemmas.
std::vector<LemmaCheck> monitor_error_split(const IterateState& cur, const GroundTruth& truth,
                                            const MonitorConfig& cfg);
std::vector<LemmaCheck> monitor_svd_closeness(const IterateState& cur, const GroundTruth& truth);
std::vector<LemmaCheck> monitor_perturbation(const IterateState& cur, const SurrogateSide& side);
std::vector<LemmaCheck> monitor_weyl_consequence(const ProblemInstance& inst);

/// Observer that evaluates every enabled lemma along a run. Attach through run_gd's
/// IterateObserver; it only reads the iterates.
class MonitorSuite {
 public:
  MonitorSuite(const ProblemInstance& inst, double mu, double alpha, MonitorConfig cfg,
               std::function<void(const LemmaCheck&)> sink = {}, bool keep_all = false);

  void observe(long long t, const Matrix& u);
  IterateObserver observer();

  const MonitorReport& report() const { return report_; }

 private:
  void emit(std::vector<LemmaCheck> checks);
  bool enabled(Lemma lemma) const { return cfg_.enabled.count(lemma) > 0; }

  const ProblemInstance* inst_;
  double mu_;
  double alpha_;
  MonitorConfig cfg_;
  MonitorReport report_;
  std::optional<IterateState> previous_;
  // Surrogate state for the perturbation lemma.
  Matrix tilde_;
  bool tilde_valid_ = false;
  double u_norm_ = 0.0;
  double sigma_min_vlu_ = 0.0;
};

void to_json(nlohmann::json& j, const LemmaCheck& check);
nlohmann::json summary_json(const MonitorReport& report, const MonitorConfig& cfg);

}  // namespace lowrank
