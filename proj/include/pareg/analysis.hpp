#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pareg/contact.hpp"
#include "pareg/grid.hpp"
#include "pareg/operators.hpp"

namespace pareg {

/// Empirical survival S(t) = #{v > t} / N sampled on a log-spaced t grid.
struct SurvivalCurve {
  std::size_t samples = 0;
  std::vector<double> t;
  std::vector<double> survival;
};

/// Power-law fit S(t) ~ C t^{-eps} on the window S in [20/N, 0.5].
/// epsilon_hat = +inf marks a bounded field (survival reaches zero before
/// a usable window forms).
struct TailFit {
  double epsilon_hat = 0.0;
  double constant_hat = 0.0;
  double t_min = 0.0;  // fit range
  double t_max = 0.0;
  double residual = 0.0;  // max |log S - fit| over the range
  std::size_t points = 0;
  bool bounded = false;
  SurvivalCurve curve;
};

class InsufficientTail : public NumericalError {
 public:
  InsufficientTail(const std::string& what, SurvivalCurve curve)
      : NumericalError(what), curve_(std::move(curve)) {}
  const SurvivalCurve& curve() const { return curve_; }

 private:
  SurvivalCurve curve_;
};

inline constexpr int kTailPointsPerDecade = 16;

SurvivalCurve survival_curve(std::span<const double> values, double t_lo, double t_hi,
                             int points_per_decade = kTailPointsPerDecade);

/// Fits on t in [t0 * sup_u, cap]. Needs >= 5 window points spanning at
/// least one decade, else InsufficientTail (or the bounded sentinel when the
/// survival has already reached zero).
TailFit tail_fit(std::span<const double> values, double sup_u, double t0 = 1.0, double cap = kDefaultCap);

struct DecayRow {
  double t = 0.0;
  std::size_t above_t = 0;
  std::size_t above_Mt = 0;
  bool pass = false;
};

struct MeasureDecayReport {
  double M = 0.0;
  double sigma = 0.0;
  std::vector<DecayRow> rows;
  bool all_pass = true;
  /// Largest sigma with |{v > Mt}| <= (1 - sigma) |{v > t}| on every listed
  /// t with a nonempty level set, per M in frontier_M.
  std::vector<double> frontier_M;
  std::vector<double> frontier_sigma;
};

/// Node-count measures of the super-level sets of `values` (one value per
/// region node). Empty input throws InputError.
MeasureDecayReport measure_decay_check(std::span<const double> values, double M, double sigma,
                                       std::span<const double> t_list);

/// Boolean field on the dyadic unit cube grid side^dim (side a power of two),
/// first index slowest.
struct CubeMask {
  int dim = 2;
  int side = 0;
  std::vector<std::uint8_t> bits;

  std::size_t count() const;
};

struct CzResult {
  bool hypotheses_hold = false;
  std::string failed_hypothesis;  // empty when both hold
  bool conclusion = false;        // |D| <= delta |E|
  std::size_t d_count = 0;
  std::size_t e_count = 0;
};

/// Checks |D| <= delta |Q1| and that every dyadic cube Q with
/// |D cap Q| >= delta |Q| has its threefold dilation (clipped to Q1) inside
/// E, then evaluates |D| <= delta |E|. D must be a subset of E.
CzResult cz_check(const CubeMask& D, const CubeMask& E, double delta);

/// Random instance satisfying both hypotheses: disjoint dyadic cubes Q_i,
/// E the union of their clipped dilations, D below a delta fraction of the
/// middle third of each Q_i.
std::pair<CubeMask, CubeMask> cz_instance(int dim, int side, double delta, CounterRng& rng);

/// P(x) = c + b . x + x . C x / 2.
struct Quadratic {
  double c = 0.0;
  std::vector<double> b;
  SymMat C;

  double operator()(const Point& x) const;
};

struct FlatnessOptions {
  double eta = 0.5;
  double alpha = 0.5;
  int kmax = 8;
  double delta0 = 1.0;       // hypothesis threshold on sup_{B_1} |u|
  double ratio_slack = 1.0;  // scale passes when ratio <= slack eta^{2+alpha}
};

struct FlatnessScale {
  int k = 0;
  double radius = 0.0;  // eta^k
  Quadratic P;          // P_k
  double error = 0.0;   // sup_{B_{eta^k}} |u - P_k|
  double ratio = 0.0;   // e_k / e_{k-1}, NaN at k = 0
  double a = 0.0;       // correction applied when building P_{k+1}
  double correction_residual = 0.0;  // |F(D^2 P~ + 2 a I)|
  std::size_t fit_nodes = 0;
};

struct FlatnessTrace {
  double delta = 0.0;  // sup_{B_1} |u|
  double eta = 0.0;
  double alpha = 0.0;
  double target = 0.0;  // eta^{2+alpha}
  std::vector<FlatnessScale> scales;
  bool hypothesis_met = true;
  bool truncated = false;
  bool contracts = true;  // every ratio within slack of the target
  std::vector<std::string> warnings;
};

/// Builds P_{k+1} = P_k + eta^{2k} P~(eta^{-k} x) from least-squares
/// quadratic fits of the rescaled remainder on B_eta, each corrected by
/// a |x|^2 so that F(D^2 P_{k+1}) = 0. Stops at scales below 4h.
FlatnessTrace flatness_iterate(const GridFn& u, const Operator& F, const FlatnessOptions& opt = {});

/// Solves F(C + 2 a I) = 0 for a within |a| <= |F(C)| / (2 lambda d).
std::pair<double, double> flatness_correction(const Operator& F, const SymMat& C);

struct CalibrationTrial {
  std::string op;
  std::uint64_t seed = 0;
  double delta = 0.0;
  double worst_ratio = 0.0;
  bool contracts = false;
};

struct CalibrationResult {
  double delta0_hat = 0.0;
  double eta_hat = 0.5;
  double delta_alpha_hat = 0.0;
  std::vector<double> searched;  // dyadic deltas, largest first
  std::vector<CalibrationTrial> trials;
};

struct CalibrationOptions {
  double eta = 0.5;
  double alpha = 0.5;
  int n = 32;              // grid resolution of the sampled solutions
  double delta_max = 1.0;  // top of the dyadic search
  int levels = 8;          // delta_max 2^{-j}, j < levels
  double ratio_slack = 1.1;
  int threads = 1;
};

/// Largest dyadic delta at which flatness_iterate contracts on every sampled
/// solution of every operator; delta_alpha = delta0 / 3. Throws
/// NumericalError when no delta in the range succeeds.
CalibrationResult calibrate_constants(const std::vector<Operator>& family, int trials, std::uint64_t seed,
                                      const CalibrationOptions& opt = {});

struct SingularReport {
  double r = 0.0;
  double threshold = 0.0;  // delta_alpha / r
  std::vector<std::uint8_t> flagged;
  std::size_t flagged_count = 0;
  std::vector<double> scales;            // r 2^j
  std::vector<std::size_t> counts;       // N(rho)
  double box_dimension = 0.0;
  std::vector<double> epsilons;
  std::vector<double> products;          // N(r) r^{d - eps}
};

/// Flags inner node y when every inner node within distance r of y has
/// psi > delta_alpha / r. Requires 0 < r < 1/16 and r >= 4h.
SingularReport flag_singular(const CurvatureField& field, double r, double delta_alpha,
                             std::span<const double> epsilons = {});

struct BoxDimension {
  double dim_hat = 0.0;
  std::vector<double> scales;
  std::vector<std::size_t> counts;
};

/// Counts rho-boxes anchored at the mask's lowest node index that meet the
/// mask; dim_hat is minus the least-squares slope of log N vs log rho.
/// Needs >= 3 scales, each >= 2h.
BoxDimension box_dimension(const Grid& grid, std::span<const std::uint8_t> mask, std::span<const double> scales);

/// Least-squares slope and intercept of y against x.
std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace pareg
