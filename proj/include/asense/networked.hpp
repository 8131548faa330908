#pragma once

#include <Eigen/Dense>
#include <vector>

#include "asense/common.hpp"

namespace asense::net {

struct RruSet {
  std::vector<Vec2> positions;
  bool synchronized = true;  // required for TDOA processing

  void validate() const;
};

// One time-of-arrival measurement per (slot, RRU).
struct ToaFrame {
  Eigen::MatrixXd toasS;  // rows = slots, cols = RRUs

  int numSlots() const { return static_cast<int>(toasS.rows()); }
  int numRrus() const { return static_cast<int>(toasS.cols()); }
};

struct TdoaSet {
  Eigen::MatrixXd valuesS;      // rows = slots, cols = non-reference RRUs
  std::vector<int> rruIndices;  // original RRU per column
  int refRru = 0;
};

struct EmModel {
  double offsetWalkSigmaS = 0.0;   // per-slot Gaussian increment std
  double initOffsetSigmaS = 0.0;   // prior std of the slot-0 offset
  double toaNoiseSigmaS = 1e-9;
  Vec2 priorPositionMean;
  Eigen::Matrix2d priorPositionCov = Eigen::Matrix2d::Identity();
  bool usePositionPrior = false;

  void validate() const;
};

TdoaSet toa_to_tdoa(const ToaFrame& frame, int refRru);

struct TdoaSolveResult {
  Vec2 position;
  int iterations = 0;
  double finalResidualS = 0.0;  // RMS of the TDOA residuals
  std::vector<std::string> warnings;
};

// Damped Gauss-Newton on bistatic-range-difference residuals for one slot.
TdoaSolveResult solve_tdoa(const std::vector<double>& tdoasS, const RruSet& rrus, int refRru,
                           const Vec2& txPos, const Vec2& init);

// Triangulation from two interior angles of the target triangle; the target
// is placed on the positive half-plane of U->V unless upperHalfPlane = false.
Vec2 solve_aoa(const Vec2& posU, const Vec2& posV, double angleARad, double angleBRad,
               bool upperHalfPlane = true);

// Interior angles seen from U and V toward target X, for round-trip checks.
std::pair<double, double> aoa_from_truth(const Vec2& posU, const Vec2& posV, const Vec2& x);

struct EmOptions {
  bool staticTarget = true;
  int maxIterations = 200;
  double logLikTolerance = 1e-9;
};

struct EmResult {
  std::vector<Vec2> trajectory;   // one entry per slot (all equal in static mode)
  Eigen::MatrixXd offsetMeanS;    // posterior offset means, rows = slots
  Eigen::MatrixXd offsetVarS2;    // posterior offset variances
  std::vector<double> logLikelihood;  // observed-data log-likelihood per iteration
  int iterations = 0;
  bool converged = false;
};

// Iterative EM treating per-RRU clock offsets as latent Gaussian random walks:
// E-step runs a scalar Kalman smoother per RRU against the current trajectory,
// M-step refits positions by damped Gauss-Newton on the offset-compensated
// residuals (accepted only when the expected complete-data objective improves).
EmResult em_localize(const ToaFrame& frame, const RruSet& rrus, const Vec2& txPos,
                     const EmModel& model, const Vec2& init, const EmOptions& options = {});

struct ToaLsqResult {
  std::vector<Vec2> trajectory;
  double finalResidualS = 0.0;
};

// Offset-ignoring TOA least squares, the baseline the EM is compared against.
ToaLsqResult toa_least_squares(const ToaFrame& frame, const RruSet& rrus, const Vec2& txPos,
                               const Vec2& init, bool staticTarget = true);

struct ToaSimTruth {
  Eigen::MatrixXd rruOffsetsS;        // per (slot, RRU) latent offsets
  std::vector<double> commonOffsetsS;  // per-slot Tx-side offset common to all RRUs
};

// Forward model: bistatic TOAs plus common Tx offset, per-RRU offset walks and
// measurement noise.
ToaFrame simulate_toa(const RruSet& rrus, const Vec2& txPos,
                      const std::vector<Vec2>& targetPerSlot, double commonOffsetSigmaS,
                      const EmModel& model, Rng& rng, ToaSimTruth* truth = nullptr);

double bistatic_toa(const Vec2& txPos, const Vec2& target, const Vec2& rru);

}  // namespace asense::net
