#include "asense/networked.hpp"

#include <algorithm>
#include <cmath>

namespace asense::net {

void RruSet::validate() const {
  if (positions.size() < 2) throw Error("rru set: need at least two RRUs");
  for (size_t i = 0; i < positions.size(); ++i)
    for (size_t j = i + 1; j < positions.size(); ++j)
      if (distance(positions[i], positions[j]) < 1e-9)
        throw Error("rru set: RRU positions must be distinct");
}

void EmModel::validate() const {
  if (offsetWalkSigmaS < 0 || initOffsetSigmaS < 0 || toaNoiseSigmaS < 0)
    throw Error("em model: sigmas must be >= 0");
  const Eigen::Matrix2d& c = priorPositionCov;
  if (usePositionPrior && (c(0, 0) <= 0 || c.determinant() <= 0))
    throw Error("em model: position prior covariance must be positive definite");
}

double bistatic_toa(const Vec2& txPos, const Vec2& target, const Vec2& rru) {
  return (distance(txPos, target) + distance(target, rru)) / kSpeedOfLight;
}

TdoaSet toa_to_tdoa(const ToaFrame& frame, int refRru) {
  const int I = frame.numRrus();
  if (I < 2) throw Error("toa_to_tdoa: need at least two RRUs");
  if (refRru < 0 || refRru >= I) throw Error("toa_to_tdoa: reference RRU out of range");

  TdoaSet out;
  out.refRru = refRru;
  out.valuesS.resize(frame.numSlots(), I - 1);
  int col = 0;
  for (int i = 0; i < I; ++i) {
    if (i == refRru) continue;
    out.rruIndices.push_back(i);
    out.valuesS.col(col) = frame.toasS.col(i) - frame.toasS.col(refRru);
    ++col;
  }
  return out;
}

namespace {

bool nearly_collinear(const std::vector<Vec2>& pts) {
  if (pts.size() < 3) return true;
  // area-based test against the span of the point set
  double span = 0.0;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) span = std::max(span, distance(pts[i], pts[j]));
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      for (size_t k = j + 1; k < pts.size(); ++k) {
        const Vec2 a = pts[j] - pts[i];
        const Vec2 b = pts[k] - pts[i];
        const double area = std::abs(a.x * b.y - a.y * b.x);
        if (area > 1e-6 * span * span) return false;
      }
  return true;
}

}  // namespace

TdoaSolveResult solve_tdoa(const std::vector<double>& tdoasS, const RruSet& rrus, int refRru,
                           const Vec2& txPos, const Vec2& init) {
  rrus.validate();
  if (!rrus.synchronized) throw Error("solve_tdoa: RRUs must be synchronized");
  const int I = static_cast<int>(rrus.positions.size());
  if (I < 3) throw Error("solve_tdoa: need at least three RRUs");
  if (refRru < 0 || refRru >= I) throw Error("solve_tdoa: reference RRU out of range");
  if (static_cast<int>(tdoasS.size()) != I - 1)
    throw Error("solve_tdoa: one TDOA per non-reference RRU required");

  TdoaSolveResult result;
  if (nearly_collinear(rrus.positions))
    result.warnings.push_back("RRU geometry is nearly collinear; solution may be ambiguous");

  std::vector<int> others;
  for (int i = 0; i < I; ++i)
    if (i != refRru) others.push_back(i);
  const Vec2& ref = rrus.positions[static_cast<size_t>(refRru)];

  // Bistatic range differences: the common tx->target leg cancels, leaving
  // range differences toward the RRUs.
  auto residuals = [&](const Vec2& x) {
    Eigen::VectorXd r(I - 1);
    for (int k = 0; k < I - 1; ++k) {
      const Vec2& rru = rrus.positions[static_cast<size_t>(others[static_cast<size_t>(k)])];
      r(k) = (distance(x, rru) - distance(x, ref)) / kSpeedOfLight -
             tdoasS[static_cast<size_t>(k)];
    }
    return r;
  };

  Vec2 x = init;
  Eigen::VectorXd r = residuals(x);
  int iter = 0;
  for (; iter < 100; ++iter) {
    Eigen::MatrixXd J(I - 1, 2);
    for (int k = 0; k < I - 1; ++k) {
      const Vec2& rru = rrus.positions[static_cast<size_t>(others[static_cast<size_t>(k)])];
      const double dOther = std::max(distance(x, rru), 1e-12);
      const double dRef = std::max(distance(x, ref), 1e-12);
      J(k, 0) = ((x.x - rru.x) / dOther - (x.x - ref.x) / dRef) / kSpeedOfLight;
      J(k, 1) = ((x.y - rru.y) / dOther - (x.y - ref.y) / dRef) / kSpeedOfLight;
    }
    const Eigen::Matrix2d jtj = J.transpose() * J;
    // relative test: rows scale with 1/c, so judge conditioning, not magnitude
    if (!(jtj.determinant() > 1e-16 * jtj.trace() * jtj.trace()))
      throw Error("solve_tdoa: singular Jacobian (degenerate geometry)");
    const Eigen::Vector2d step = jtj.ldlt().solve(-J.transpose() * r);

    // halving line search
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < 30; ++h, scale *= 0.5) {
      const Vec2 cand{x.x + scale * step(0), x.y + scale * step(1)};
      const Eigen::VectorXd rc = residuals(cand);
      if (rc.squaredNorm() < r.squaredNorm() || scale * step.norm() < 1e-15) {
        x = cand;
        r = rc;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (scale * step.norm() < 1e-9) {
      ++iter;
      break;
    }
  }
  if (iter >= 100) result.warnings.push_back("solve_tdoa: hit iteration limit");

  result.position = x;
  result.iterations = iter;
  result.finalResidualS = std::sqrt(r.squaredNorm() / static_cast<double>(I - 1));
  if (distance(x, txPos) < 1e-6)
    result.warnings.push_back("target coincides with the transmitter; bistatic degeneracy");
  return result;
}

Vec2 solve_aoa(const Vec2& posU, const Vec2& posV, double angleARad, double angleBRad,
               bool upperHalfPlane) {
  if (angleARad <= 0 || angleBRad <= 0)
    throw Error("solve_aoa: interior angles must be positive");
  if (angleARad + angleBRad >= kPi)
    throw Error("solve_aoa: angles sum to >= pi, rays do not intersect");
  const double base = distance(posU, posV);
  if (base <= 0) throw Error("solve_aoa: U and V coincide");

  const double range = base * std::sin(angleBRad) / std::sin(angleARad + angleBRad);
  const Vec2 u = (posV - posU) * (1.0 / base);
  const double sign = upperHalfPlane ? 1.0 : -1.0;
  const double c = std::cos(angleARad), s = sign * std::sin(angleARad);
  const Vec2 dir{c * u.x - s * u.y, s * u.x + c * u.y};
  return posU + dir * range;
}

std::pair<double, double> aoa_from_truth(const Vec2& posU, const Vec2& posV, const Vec2& x) {
  auto interior = [](const Vec2& at, const Vec2& toward, const Vec2& target) {
    const Vec2 a = toward - at;
    const Vec2 b = target - at;
    const double cosv =
        std::clamp(a.dot(b) / std::max(a.norm() * b.norm(), 1e-300), -1.0, 1.0);
    return std::acos(cosv);
  };
  return {interior(posU, posV, x), interior(posV, posU, x)};
}

namespace {

struct SmootherOutput {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double logLik = 0.0;
};

// Scalar Kalman filter + RTS smoother for a random-walk offset observed with
// Gaussian noise. Returns the marginal log-likelihood via the innovations.
SmootherOutput smooth_offsets(const Eigen::VectorXd& y, double initVar, double walkVar,
                              double noiseVar) {
  const int T = static_cast<int>(y.size());
  Eigen::VectorXd predMean(T), predVar(T), filtMean(T), filtVar(T);
  double logLik = 0.0;
  const double R = std::max(noiseVar, 1e-30);
  for (int t = 0; t < T; ++t) {
    const double pm = t == 0 ? 0.0 : filtMean(t - 1);
    const double pv = (t == 0 ? initVar : filtVar(t - 1) + walkVar);
    predMean(t) = pm;
    predVar(t) = pv;
    const double S = pv + R;
    const double innov = y(t) - pm;
    logLik += -0.5 * (std::log(kTwoPi * S) + innov * innov / S);
    const double K = pv / S;
    filtMean(t) = pm + K * innov;
    filtVar(t) = pv * (1.0 - K);
  }

  SmootherOutput out;
  out.mean.resize(T);
  out.var.resize(T);
  out.mean(T - 1) = filtMean(T - 1);
  out.var(T - 1) = filtVar(T - 1);
  for (int t = T - 2; t >= 0; --t) {
    const double nextPredVar = filtVar(t) + walkVar;
    const double G = nextPredVar > 0 ? filtVar(t) / nextPredVar : 0.0;
    out.mean(t) = filtMean(t) + G * (out.mean(t + 1) - filtMean(t));
    out.var(t) = filtVar(t) + G * G * (out.var(t + 1) - nextPredVar);
  }
  out.logLik = logLik;
  return out;
}

// Damped Gauss-Newton for positions given offset-compensated TOAs. In static
// mode all slots share one position. An optional Gaussian position prior is
// folded in as two extra residual rows (whitened by the TOA noise so the
// combined cost stays the MAP objective). Returns the sum of squared
// TOA residuals plus prior rows.
double refit_positions(const ToaFrame& frame, const RruSet& rrus, const Vec2& txPos,
                       const Eigen::MatrixXd& offsetMean, bool staticTarget,
                       const EmModel* prior, std::vector<Vec2>& trajectory) {
  const int T = frame.numSlots();
  const int I = frame.numRrus();

  const bool usePrior = prior != nullptr && prior->usePositionPrior;
  Eigen::Matrix2d priorRoot = Eigen::Matrix2d::Zero();
  if (usePrior) {
    const Eigen::Matrix2d info = prior->priorPositionCov.inverse();
    priorRoot = Eigen::LLT<Eigen::Matrix2d>(info).matrixL().transpose();
    priorRoot *= std::max(prior->toaNoiseSigmaS, 1e-15);
  }

  auto slotResiduals = [&](int t, const Vec2& x, Eigen::VectorXd& r) {
    for (int i = 0; i < I; ++i)
      r(i) = frame.toasS(t, i) - offsetMean(t, i) -
             bistatic_toa(txPos, x, rrus.positions[static_cast<size_t>(i)]);
  };
  auto slotJacobian = [&](const Vec2& x, Eigen::MatrixXd& J) {
    const double dTx = std::max(distance(x, txPos), 1e-12);
    for (int i = 0; i < I; ++i) {
      const Vec2& rru = rrus.positions[static_cast<size_t>(i)];
      const double dR = std::max(distance(x, rru), 1e-12);
      // residual = toa - rho(x); d(-rho)/dx
      J(i, 0) = -((x.x - txPos.x) / dTx + (x.x - rru.x) / dR) / kSpeedOfLight;
      J(i, 1) = -((x.y - txPos.y) / dTx + (x.y - rru.y) / dR) / kSpeedOfLight;
    }
  };
  auto priorResidual = [&](const Vec2& x, Eigen::VectorXd& r, int offset) {
    if (!usePrior) return;
    const Eigen::Vector2d d(x.x - prior->priorPositionMean.x,
                            x.y - prior->priorPositionMean.y);
    r.segment(offset, 2) = -(priorRoot * d);
  };

  // Solve one nonlinear least-squares problem given residual/jacobian fills.
  auto gaussNewton = [&](Vec2 x, int rows, auto&& fillResiduals, auto&& fillJacobian,
                         double& finalCost) {
    Eigen::VectorXd r(rows);
    fillResiduals(x, r);
    for (int iter = 0; iter < 50; ++iter) {
      Eigen::MatrixXd J(rows, 2);
      fillJacobian(x, J);
      const Eigen::Matrix2d jtj = J.transpose() * J;
      if (!(jtj.determinant() > 1e-16 * jtj.trace() * jtj.trace()))
        throw Error("em_localize: singular position Jacobian");
      const Eigen::Vector2d step = jtj.ldlt().solve(-J.transpose() * r);
      double scale = 1.0;
      bool accepted = false;
      for (int h = 0; h < 20; ++h, scale *= 0.5) {
        const Vec2 cand{x.x + scale * step(0), x.y + scale * step(1)};
        Eigen::VectorXd rc(rows);
        fillResiduals(cand, rc);
        if (rc.squaredNorm() < r.squaredNorm()) {
          x = cand;
          r = rc;
          accepted = true;
          break;
        }
      }
      if (!accepted || scale * step.norm() < 1e-12) break;
    }
    finalCost = r.squaredNorm();
    return x;
  };

  const int priorRows = usePrior ? 2 : 0;
  double totalCost = 0.0;
  if (staticTarget) {
    const int rows = T * I + priorRows;
    auto fillR = [&](const Vec2& pos, Eigen::VectorXd& rr) {
      Eigen::VectorXd slot(I);
      for (int t = 0; t < T; ++t) {
        slotResiduals(t, pos, slot);
        rr.segment(t * I, I) = slot;
      }
      priorResidual(pos, rr, T * I);
    };
    auto fillJ = [&](const Vec2& pos, Eigen::MatrixXd& J) {
      Eigen::MatrixXd Jslot(I, 2);
      slotJacobian(pos, Jslot);
      for (int t = 0; t < T; ++t) J.block(t * I, 0, I, 2) = Jslot;
      if (usePrior) J.block(T * I, 0, 2, 2) = -priorRoot;
    };
    const Vec2 x = gaussNewton(trajectory[0], rows, fillR, fillJ, totalCost);
    std::fill(trajectory.begin(), trajectory.end(), x);
  } else {
    for (int t = 0; t < T; ++t) {
      const int rows = I + priorRows;
      auto fillR = [&](const Vec2& pos, Eigen::VectorXd& rr) {
        Eigen::VectorXd slot(I);
        slotResiduals(t, pos, slot);
        rr.segment(0, I) = slot;
        priorResidual(pos, rr, I);
      };
      auto fillJ = [&](const Vec2& pos, Eigen::MatrixXd& J) {
        Eigen::MatrixXd Jslot(I, 2);
        slotJacobian(pos, Jslot);
        J.block(0, 0, I, 2) = Jslot;
        if (usePrior) J.block(I, 0, 2, 2) = -priorRoot;
      };
      double cost = 0.0;
      trajectory[static_cast<size_t>(t)] =
          gaussNewton(trajectory[static_cast<size_t>(t)], rows, fillR, fillJ, cost);
      totalCost += cost;
    }
  }
  return totalCost;
}

}  // namespace

EmResult em_localize(const ToaFrame& frame, const RruSet& rrus, const Vec2& txPos,
                     const EmModel& model, const Vec2& init, const EmOptions& options) {
  rrus.validate();
  model.validate();
  const int T = frame.numSlots();
  const int I = frame.numRrus();
  if (T < 1) throw Error("em_localize: need at least one slot");
  if (I != static_cast<int>(rrus.positions.size()))
    throw Error("em_localize: frame/RRU count mismatch");

  const double walkVar = model.offsetWalkSigmaS * model.offsetWalkSigmaS;
  const double initVar = model.initOffsetSigmaS * model.initOffsetSigmaS;
  const double noiseVar = model.toaNoiseSigmaS * model.toaNoiseSigmaS;

  EmResult result;
  result.trajectory.assign(static_cast<size_t>(T), init);
  result.offsetMeanS = Eigen::MatrixXd::Zero(T, I);
  result.offsetVarS2 = Eigen::MatrixXd::Zero(T, I);

  // Quadratic part of the position log-prior; in static mode it applies once.
  auto logPrior = [&](const std::vector<Vec2>& traj) {
    if (!model.usePositionPrior) return 0.0;
    const Eigen::Matrix2d info = model.priorPositionCov.inverse();
    double lp = 0.0;
    const size_t count = options.staticTarget ? 1 : traj.size();
    for (size_t t = 0; t < count; ++t) {
      const Eigen::Vector2d d(traj[t].x - model.priorPositionMean.x,
                              traj[t].y - model.priorPositionMean.y);
      lp += -0.5 * d.dot(info * d);
    }
    return lp;
  };

  auto eStep = [&](const std::vector<Vec2>& traj, Eigen::MatrixXd& mean, Eigen::MatrixXd& var) {
    double logLik = logPrior(traj);
    Eigen::VectorXd y(T);
    for (int i = 0; i < I; ++i) {
      for (int t = 0; t < T; ++t)
        y(t) = frame.toasS(t, i) -
               bistatic_toa(txPos, traj[static_cast<size_t>(t)],
                            rrus.positions[static_cast<size_t>(i)]);
      const SmootherOutput s = smooth_offsets(y, initVar, walkVar, noiseVar);
      mean.col(i) = s.mean;
      var.col(i) = s.var;
      logLik += s.logLik;
    }
    return logLik;
  };

  double logLik = eStep(result.trajectory, result.offsetMeanS, result.offsetVarS2);
  result.logLikelihood.push_back(logLik);
  if (!std::isfinite(logLik)) throw Error("em_localize: non-finite likelihood");

  int iter = 0;
  for (; iter < options.maxIterations; ++iter) {
    std::vector<Vec2> candidate = result.trajectory;
    refit_positions(frame, rrus, txPos, result.offsetMeanS, options.staticTarget, &model,
                    candidate);

    Eigen::MatrixXd mean(T, I), var(T, I);
    const double candLik = eStep(candidate, mean, var);
    if (!std::isfinite(candLik)) throw Error("em_localize: non-finite likelihood");

    if (candLik >= logLik) {
      result.trajectory = candidate;
      result.offsetMeanS = mean;
      result.offsetVarS2 = var;
    }
    const double gain = candLik - logLik;
    logLik = std::max(candLik, logLik);
    result.logLikelihood.push_back(logLik);
    if (gain < options.logLikTolerance) {
      ++iter;
      break;
    }
  }
  result.iterations = iter;
  result.converged = iter < options.maxIterations;
  return result;
}

ToaLsqResult toa_least_squares(const ToaFrame& frame, const RruSet& rrus, const Vec2& txPos,
                               const Vec2& init, bool staticTarget) {
  rrus.validate();
  ToaLsqResult out;
  out.trajectory.assign(static_cast<size_t>(frame.numSlots()), init);
  const Eigen::MatrixXd zeroOffsets =
      Eigen::MatrixXd::Zero(frame.numSlots(), frame.numRrus());
  const double cost = refit_positions(frame, rrus, txPos, zeroOffsets, staticTarget, nullptr,
                                      out.trajectory);
  out.finalResidualS =
      std::sqrt(cost / static_cast<double>(frame.numSlots() * frame.numRrus()));
  return out;
}

ToaFrame simulate_toa(const RruSet& rrus, const Vec2& txPos,
                      const std::vector<Vec2>& targetPerSlot, double commonOffsetSigmaS,
                      const EmModel& model, Rng& rng, ToaSimTruth* truth) {
  rrus.validate();
  model.validate();
  const int T = static_cast<int>(targetPerSlot.size());
  const int I = static_cast<int>(rrus.positions.size());
  if (T < 1) throw Error("simulate_toa: need at least one slot");

  Eigen::MatrixXd offsets(T, I);
  for (int i = 0; i < I; ++i) {
    double d = gaussian(rng, 0.0, model.initOffsetSigmaS);
    for (int t = 0; t < T; ++t) {
      if (t > 0) d += gaussian(rng, 0.0, model.offsetWalkSigmaS);
      offsets(t, i) = d;
    }
  }
  std::vector<double> common(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) common[static_cast<size_t>(t)] = gaussian(rng, 0.0, commonOffsetSigmaS);

  ToaFrame frame;
  frame.toasS.resize(T, I);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < I; ++i)
      frame.toasS(t, i) = bistatic_toa(txPos, targetPerSlot[static_cast<size_t>(t)],
                                       rrus.positions[static_cast<size_t>(i)]) +
                          offsets(t, i) + common[static_cast<size_t>(t)] +
                          gaussian(rng, 0.0, model.toaNoiseSigmaS);
  if (truth) {
    truth->rruOffsetsS = offsets;
    truth->commonOffsetsS = common;
  }
  return frame;
}

}  // namespace asense::net
