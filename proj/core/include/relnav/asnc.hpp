#pragma once

#include <deque>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

#include "relnav/procnoise.hpp"

// Adaptive state-noise compensation: estimate the diagonal white-noise
// power spectral densities that drive the process-noise model, from a
// sliding window of filter covariances, transition matrices, and state
// corrections. The estimate is the solution of a box-constrained weighted
// least-squares fit of the analytic covariance shapes to the matched
// noise covariance.
namespace relnav::asnc {

using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using procnoise::Mat6;
using procnoise::PsdDiagonal;
using procnoise::Vec21;

/// Requested a covariance match before the window accumulated enough
/// history.
class WindowNotFull : public std::runtime_error {
 public:
  WindowNotFull() : std::runtime_error("match window is not full yet") {}
};

/// The noise-shape regression matrix has (numerically) dependent columns.
class RankDeficientMapping : public std::invalid_argument {
 public:
  RankDeficientMapping()
      : std::invalid_argument(
            "noise-shape regression matrix is rank deficient") {}
};

/// Fixed-capacity sliding window of filter history. Each push records the
/// a-posteriori covariance after a measurement epoch together with the
/// transition matrix and state correction that produced it; the first
/// push of a run seeds the window with the initial covariance (its
/// transition entries are ignored by the match).
class MatchWindow {
 public:
  /// capacity = number of transition triples used by the match.
  explicit MatchWindow(int capacity);

  void push(const Mat12& p_post, const Mat12& phi, const Vec12& dx);
  void clear();

  bool full() const;
  int capacity() const { return capacity_; }
  /// Number of transition triples currently available.
  int size() const;

  struct Entry {
    Mat12 p_post;
    Mat12 phi;
    Vec12 dx;
  };
  const std::deque<Entry>& entries() const { return entries_; }

 private:
  int capacity_;
  std::deque<Entry> entries_;  // at most capacity_ + 1 covariances
};

/// Windowed covariance match: average over the window of
///   P_i - Phi_i P_{i-1} Phi_i' + dx_i dx_i',
/// symmetrized. The result estimates the discrete process noise but is
/// not necessarily positive semidefinite; the bounded fit below restores
/// admissibility. Throws WindowNotFull until capacity+1 covariances have
/// been recorded.
Mat12 covariance_match(const MatchWindow& window);

/// Which 6x6 diagonal block of the matched covariance to extract.
enum class BlockSel { kOrbit, kAttitude };

/// Half-vectorized diagonal block of a matched 12x12 covariance:
/// kOrbit = rows/cols 0-5, kAttitude = rows/cols 6-11.
Vec21 extract_block(const Mat12& q_matched, BlockSel sel);

/// Box bounds for the PSD fit. Defaults: nonnegative, unbounded above.
struct PsdBounds {
  PsdDiagonal lower = PsdDiagonal::Zero();
  PsdDiagonal upper = PsdDiagonal::Constant(
      std::numeric_limits<double>::infinity());
};

/// Minimize (X q - qhat)' W_inv (X q - qhat) subject to
/// lower <= q <= upper, by a primal active-set descent (free-set solve
/// with feasible-segment clipping and KKT release). The iteration is
/// capped; if the cap is hit the best feasible iterate found is
/// returned. X must have full column rank (RankDeficientMapping
/// otherwise).
PsdDiagonal solve_bounded_wls(const Eigen::Matrix<double, 21, 3>& x,
                              const Vec21& qhat,
                              const Eigen::Matrix<double, 21, 21>& w_inv,
                              const PsdBounds& bounds);

/// One adaptation result: fitted densities and the resulting discrete
/// process-noise blocks.
struct AsncResult {
  PsdDiagonal psd_orbit;
  PsdDiagonal psd_attitude;
  Mat6 q_orbit;
  Mat6 q_attitude;
};

/// Full adaptation step: match the window, extract both diagonal blocks,
/// fit each against its analytic shape mapping with identity weighting
/// (hook for a user-supplied W_inv via the overload), and assemble the
/// process-noise blocks from the fitted densities.
AsncResult asnc_update(const MatchWindow& window,
                       const procnoise::NoiseMapping& mapping_orbit,
                       const procnoise::NoiseMapping& mapping_attitude,
                       const PsdBounds& bounds_orbit,
                       const PsdBounds& bounds_attitude);

AsncResult asnc_update(const MatchWindow& window,
                       const procnoise::NoiseMapping& mapping_orbit,
                       const procnoise::NoiseMapping& mapping_attitude,
                       const PsdBounds& bounds_orbit,
                       const PsdBounds& bounds_attitude,
                       const Eigen::Matrix<double, 21, 21>& w_inv);

}  // namespace relnav::asnc
