#pragma once

// Synthetic trajectories with known ground truth.

#include "cplass/rng.hpp"
#include "cplass/types.hpp"

#include <cstdint>
#include <vector>

namespace cplass {

/// Continuous piecewise-linear anchor plus isotropic Gaussian noise.
struct PiecewiseTruth {
    std::vector<double> tau_true;  // seconds, strictly increasing in (0, n*dt)
    RowMatrix<double> V_true;      // k x d, micrometres per second
    Eigen::VectorXd intercept_true;
    double sigma = 0.0;
    double dt = 0.05;
    Index n = 2;

    Index dims() const { return V_true.cols(); }
    void validate() const;
};

struct SimulatedPath {
    Trajectory trajectory;
    Segmentation truth;  // rss/sigma2_hat measured against the noisy observations
};

/// The noise-free ground truth segmentation of `truth` (rss = 0).
Segmentation truth_segmentation(const PiecewiseTruth& truth);

SimulatedPath simulate_piecewise(const PiecewiseTruth& truth, std::uint64_t seed);

/// Stationary/motile cargo model.
enum class SwitchingRule {
    /// p and q act when a segment ends; stationary durations are exponential with
    /// mean `mean_stationary` and run lengths exponential with mean `mean_distance`.
    PerSegment,
    /// p and q act every time step and the direction rule is applied on every motile step.
    PerStep,
};

struct TwoStateParams {
    Index n = 200;
    double p = 1.0;               // stationary -> motile
    double q = 0.5;               // motile -> stationary
    double alpha = 8.0;           // Gamma shape of motile speed
    double beta = 0.02;           // Gamma rate of motile speed, per (nm/s)
    double p_reverse = 0.3;
    double p_continue = 0.3;
    double sigma_cargo = 0.1;     // micrometres
    double dt = 0.04;             // seconds
    double mean_stationary = 5.0; // seconds
    double mean_distance = 300.0; // nanometres
    Index dims = 2;
    SwitchingRule rule = SwitchingRule::PerSegment;
    double burn_in_factor = 5.0;  // simulated length in multiples of n before keeping the last n steps

    /// The reference lysosome parameter set at 25 Hz.
    static TwoStateParams base() { return {}; }

    void validate() const;
};

/// One constant-velocity stretch of the two-state process.
struct TwoStatePiece {
    bool motile = false;
    Index steps = 1;
    Eigen::VectorXd velocity;  // micrometres per second
    std::int64_t run = 0;      // pieces of one uninterrupted state episode share a run id
};

/// Raw pieces covering at least `total_steps` grid steps (before windowing or merging).
std::vector<TwoStatePiece> two_state_pieces(const TwoStateParams& params, Rng& rng, Index total_steps);

SimulatedPath simulate_two_state(const TwoStateParams& params, std::uint64_t seed);

/// Named study setups expressed as piecewise truths (2-d, motion along x).
namespace setups {

/// Three segments with speeds (s1, s2, s3) along the x axis, changes at tau1 and tau2.
PiecewiseTruth three_segment(double dt, Index n, double tau1, double tau2, double s1, double s2, double s3, double sigma);

/// Single stationary segment.
PiecewiseTruth stationary(double dt, Index n, double sigma);

/// 20 Hz, 30 s, changes at 10 s and 20 s, velocities (0.1,-0.1), (0,0), (-0.1,0.1), sigma 0.1.
PiecewiseTruth binseg_failure();

/// 100 Hz, 6 s, changes at 3 s and 3.5 s, speeds (0, 0.2, 0).
PiecewiseTruth short_fast_segment(double sigma);

/// Noise level used for the short-fast-segment path when none is given.
inline constexpr double kShortFastSigma = 0.05;

/// Gamma-sweep panels: 'A' (n = 53, changes 1.1/1.55 s, speed 0.1) or 'B' (n = 203, 5/5.15 s, 0.15).
PiecewiseTruth gamma_panel(char panel, bool alternative);

/// 20 Hz power-grid cell: 2 s stationary, middle segment, 2 s stationary; sigma 0.01.
PiecewiseTruth power_cell(double middle_duration, double middle_speed);

/// Fixed two-changepoint truth on [0, 10] s observed with n points.
PiecewiseTruth consistency_truth(Index n);

}  // namespace setups

}  // namespace cplass
