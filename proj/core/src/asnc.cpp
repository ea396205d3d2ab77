#include "relnav/asnc.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>

namespace relnav::asnc {

namespace {

constexpr int kMaxActiveSetIters = 30;

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

double objective(const Mat3& a, const Vec3& b, const Vec3& q) {
  return 0.5 * q.dot(a * q) - b.dot(q);
}

}  // namespace

MatchWindow::MatchWindow(int capacity) : capacity_(capacity) {
  if (capacity < 1) {
    throw std::invalid_argument("MatchWindow: capacity must be >= 1");
  }
}

void MatchWindow::push(const Mat12& p_post, const Mat12& phi,
                       const Vec12& dx) {
  entries_.push_back(Entry{p_post, phi, dx});
  while (static_cast<int>(entries_.size()) >
         capacity_ + 1) {
    entries_.pop_front();
  }
}

void MatchWindow::clear() { entries_.clear(); }

int MatchWindow::size() const {
  return std::max(0, static_cast<int>(entries_.size()) - 1);
}

bool MatchWindow::full() const { return size() >= capacity_; }

Mat12 covariance_match(const MatchWindow& window) {
  if (!window.full()) {
    throw WindowNotFull();
  }
  const auto& e = window.entries();
  const int n = window.capacity();
  Mat12 acc = Mat12::Zero();
  for (int i = 1; i <= n; ++i) {
    const Mat12& p_prev = e[i - 1].p_post;
    const Mat12& p_curr = e[i].p_post;
    const Mat12& phi = e[i].phi;
    const Vec12& dx = e[i].dx;
    acc += p_curr - phi * p_prev * phi.transpose() + dx * dx.transpose();
  }
  acc /= static_cast<double>(n);
  return 0.5 * (acc + acc.transpose());
}

Vec21 extract_block(const Mat12& q_matched, BlockSel sel) {
  const int off = sel == BlockSel::kOrbit ? 0 : 6;
  const Mat6 block = q_matched.block<6, 6>(off, off);
  return procnoise::vech6(block);
}

PsdDiagonal solve_bounded_wls(const Eigen::Matrix<double, 21, 3>& x,
                              const Vec21& qhat,
                              const Eigen::Matrix<double, 21, 21>& w_inv,
                              const PsdBounds& bounds) {
  // Rank guard on the raw shape matrix, independent of the weighting.
  {
    Eigen::JacobiSVD<Eigen::Matrix<double, 21, 3>> svd(x);
    const auto& sv = svd.singularValues();
    if (!(sv(2) > 1e-12 * sv(0))) {
      throw RankDeficientMapping();
    }
  }
  for (int i = 0; i < 3; ++i) {
    if (!(bounds.lower(i) <= bounds.upper(i))) {
      throw std::invalid_argument("solve_bounded_wls: lower > upper");
    }
  }

  const Mat3 a = x.transpose() * w_inv * x;
  const Vec3 b = x.transpose() * w_inv * qhat;
  const double kkt_tol = 1e-9 * std::max(1.0, b.lpNorm<Eigen::Infinity>());

  auto clamp_vec = [&](Vec3 q) {
    for (int i = 0; i < 3; ++i) {
      q(i) = std::clamp(q(i), bounds.lower(i), bounds.upper(i));
    }
    return q;
  };

  // Feasible start: the clamped unconstrained solution. Components that
  // were clipped start in the active (bound) set.
  Vec3 q = clamp_vec(a.ldlt().solve(b));
  std::array<bool, 3> free{};
  for (int i = 0; i < 3; ++i) {
    free[i] = q(i) > bounds.lower(i) && q(i) < bounds.upper(i);
  }

  Vec3 best_q = q;
  double best_f = objective(a, b, q);

  for (int iter = 0; iter < kMaxActiveSetIters; ++iter) {
    // Equality-constrained solve on the free set.
    std::array<int, 3> idx{};
    int nf = 0;
    for (int i = 0; i < 3; ++i) {
      if (free[i]) idx[nf++] = i;
    }
    if (nf > 0) {
      Eigen::MatrixXd aff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int r = 0; r < nf; ++r) {
        rhs(r) = b(idx[r]);
        for (int i = 0; i < 3; ++i) {
          if (!free[i]) rhs(r) -= a(idx[r], i) * q(i);
        }
        for (int c = 0; c < nf; ++c) {
          aff(r, c) = a(idx[r], idx[c]);
        }
      }
      const Eigen::VectorXd qf = aff.ldlt().solve(rhs);

      // Walk from the current iterate toward the candidate, stopping at
      // the first bound crossed; the blocking variable joins the active
      // set.
      double alpha = 1.0;
      int blocker = -1;
      bool blocker_at_upper = false;
      for (int r = 0; r < nf; ++r) {
        const int i = idx[r];
        const double d = qf(r) - q(i);
        if (d > 0.0 && qf(r) > bounds.upper(i)) {
          const double step = (bounds.upper(i) - q(i)) / d;
          if (step < alpha) {
            alpha = step;
            blocker = i;
            blocker_at_upper = true;
          }
        } else if (d < 0.0 && qf(r) < bounds.lower(i)) {
          const double step = (bounds.lower(i) - q(i)) / d;
          if (step < alpha) {
            alpha = step;
            blocker = i;
            blocker_at_upper = false;
          }
        }
      }
      for (int r = 0; r < nf; ++r) {
        const int i = idx[r];
        q(i) += alpha * (qf(r) - q(i));
      }
      if (blocker >= 0) {
        q(blocker) =
            blocker_at_upper ? bounds.upper(blocker) : bounds.lower(blocker);
        free[blocker] = false;
        const double f = objective(a, b, q);
        if (f < best_f) {
          best_f = f;
          best_q = q;
        }
        continue;  // re-solve with the reduced free set
      }
    }

    const double f = objective(a, b, q);
    if (f < best_f) {
      best_f = f;
      best_q = q;
    }

    // KKT check: release the most negative multiplier, if any. A clamped
    // component is optimal when its gradient points out of the box.
    const Vec3 g = a * q - b;
    int release = -1;
    double worst = kkt_tol;
    for (int i = 0; i < 3; ++i) {
      if (free[i]) continue;
      if (bounds.lower(i) == bounds.upper(i)) continue;  // pinned
      const bool at_lower = q(i) <= bounds.lower(i);
      const double violation = at_lower ? -g(i) : g(i);
      if (violation > worst) {
        worst = violation;
        release = i;
      }
    }
    if (release < 0) {
      return q;  // KKT satisfied
    }
    free[release] = true;
  }
  return best_q;
}

AsncResult asnc_update(const MatchWindow& window,
                       const procnoise::NoiseMapping& mapping_orbit,
                       const procnoise::NoiseMapping& mapping_attitude,
                       const PsdBounds& bounds_orbit,
                       const PsdBounds& bounds_attitude) {
  return asnc_update(window, mapping_orbit, mapping_attitude, bounds_orbit,
                     bounds_attitude,
                     Eigen::Matrix<double, 21, 21>::Identity());
}

AsncResult asnc_update(const MatchWindow& window,
                       const procnoise::NoiseMapping& mapping_orbit,
                       const procnoise::NoiseMapping& mapping_attitude,
                       const PsdBounds& bounds_orbit,
                       const PsdBounds& bounds_attitude,
                       const Eigen::Matrix<double, 21, 21>& w_inv) {
  const Mat12 matched = covariance_match(window);
  AsncResult out;
  out.psd_orbit =
      solve_bounded_wls(mapping_orbit.vech_blocks,
                        extract_block(matched, BlockSel::kOrbit), w_inv,
                        bounds_orbit);
  out.psd_attitude =
      solve_bounded_wls(mapping_attitude.vech_blocks,
                        extract_block(matched, BlockSel::kAttitude), w_inv,
                        bounds_attitude);
  out.q_orbit = procnoise::assemble_Q(mapping_orbit, out.psd_orbit);
  out.q_attitude = procnoise::assemble_Q(mapping_attitude, out.psd_attitude);
  return out;
}

}  // namespace relnav::asnc
