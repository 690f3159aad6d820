#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lsenkf/forward_operator.hpp"
#include "lsenkf/level_set.hpp"
#include "lsenkf/matern_prior.hpp"
#include "lsenkf/mesh.hpp"

namespace lsenkf {

// Two filter variants, named by what each particle carries alongside its
// level set:
//   AugmentedSource - (phi, f) pairs; both components receive Kalman updates
//     through cross-covariances with the thresholded source.
//   PredictedData - (phi, predicted observation) pairs; the level set is
//     updated directly against the data, the auxiliary part is recomputed
//     every prediction.
enum class FilterAlgorithm { AugmentedSource, PredictedData };

// How the point estimate is formed from the ensemble:
//   MapOfMean - threshold the averaged level set.
//   MeanOfMaps - average the per-particle thresholded sources
//     (AugmentedSource only).
enum class EstimateVariant { MapOfMean, MeanOfMaps };

struct Ensemble {
    Eigen::MatrixXd phi;  // nodes x J
    Eigen::MatrixXd aux;  // nodes x J sources, or 2NM x J predicted data
    FilterAlgorithm algorithm = FilterAlgorithm::AugmentedSource;

    int size() const { return static_cast<int>(phi.cols()); }
};

struct EnsembleStats {
    Eigen::VectorXd mean_phi, mean_aux;
    Eigen::MatrixXd anom_phi, anom_aux;  // columns are particle - mean
};

struct FilterConfig {
    int ensemble_size = 1000;
    int max_iterations = 100;
    double discrepancy_tau = 1.2;
    FilterAlgorithm algorithm = FilterAlgorithm::AugmentedSource;
    EstimateVariant primary_estimate = EstimateVariant::MapOfMean;
    bool perturb_observations = false;  // per-particle noisy data copies in the update
    int threads = 1;
};

void validate_filter_config(const FilterConfig& config);

struct InversionProblem {
    const TriMesh* mesh = nullptr;
    const StackedForwardOperator* op = nullptr;
    Eigen::VectorXcd data;
    ThresholdSpec threshold;
    HJConfig hj;
    PriorSpec prior;
    NoiseModel noise;
};

// One prediction sweep: every particle's phi advances by one Euler step of
// the level-set flow, then the auxiliary component is refreshed (f = G(phi)
// or predicted data H G(phi)). AugmentedSource uses the particle's carried
// source in the velocity; PredictedData thresholds its own phi.
// scale_out receives the smallest CFL guard scale across particles.
void predict(Ensemble& ensemble, const InversionProblem& problem, int threads,
             double* scale_out = nullptr);

EnsembleStats ensemble_stats(const Ensemble& ensemble);

// Shared Kalman solve: returns the J x J coefficient matrix
// C = D^T (D D^T / J + delta^2 I)^{-1} (targets - obs)
// where D holds data-space anomalies; particle updates are then
// x_j += (1/J) * A_x * C.col(j). Throws when delta = 0 leaves the system
// singular.
Eigen::MatrixXd kalman_weights(const Eigen::MatrixXd& data_anom, const Eigen::MatrixXd& obs,
                               const Eigen::MatrixXd& targets, double delta);

// Kalman analysis for AugmentedSource: updates phi and f of every particle
// from the residual b - H f_j. targets has one column per particle (the data
// vector replicated, or perturbed copies).
void analysis_augmented_source(Ensemble& ensemble, const EnsembleStats& stats,
                               const Eigen::MatrixXd& h_real, const Eigen::MatrixXd& targets,
                               const NoiseModel& noise);

// Kalman analysis for PredictedData: updates phi from the residual b - b_j.
void analysis_predicted_data(Ensemble& ensemble, const EnsembleStats& stats,
                             const Eigen::MatrixXd& targets, const NoiseModel& noise);

// Discrepancy principle: misfit <= tau * delta * sqrt(data_dim), inclusive.
bool stopping_rule(double misfit, const NoiseModel& noise, int data_dim,
                   const FilterConfig& config);

struct IterationRecord {
    int iteration = 0;  // 0 is the prior ensemble, before any update
    double misfit_map_of_mean = 0.0;
    double misfit_mean_of_maps = 0.0;  // NaN when the variant does not exist
    double rel_error_map_of_mean = 0.0;  // NaN when no truth was supplied
    double rel_error_mean_of_maps = 0.0;
    double hj_scale_min = 1.0;
};

struct FilterResult {
    NodalField phi_mean;
    NodalField f_map_of_mean;
    NodalField f_mean_of_maps;  // empty for PredictedData
    std::vector<IterationRecord> history;
    int iterations_run = 0;
    bool stopped_by_discrepancy = false;
};

// Full prediction-analysis loop: draws the initial ensemble from the
// Whittle-Matern prior (particle j uses derive_seed(seed, j)), iterates until
// the discrepancy rule fires on the primary estimate's misfit or
// max_iterations is reached. truth, when given, adds lumped-mass weighted
// relative L2 errors to every record.
FilterResult run_filter(const FilterConfig& config, const InversionProblem& problem,
                        std::uint64_t seed, const NodalField* truth = nullptr);

// Lumped-area weighted relative L2 distance between nodal fields.
double relative_l2_error(const NodalField& estimate, const NodalField& truth,
                         const Eigen::VectorXd& lumped_weights);

}  // namespace lsenkf
