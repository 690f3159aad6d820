#include "lsenkf/enkf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lsenkf/parallel.hpp"
#include "lsenkf/rng.hpp"

namespace lsenkf {

namespace {

// reserved seed-derivation indices (particles take [0, 2^20))
constexpr std::uint64_t kPerturbBase = (1ull << 20) + 1;

void validate_problem(const InversionProblem& problem) {
    if (!problem.mesh || !problem.op) throw std::invalid_argument("problem bundle is incomplete");
    if (problem.data.size() != problem.op->total_rows())
        throw std::invalid_argument("data vector length mismatch");
    if (problem.op->node_count != problem.mesh->node_count())
        throw std::invalid_argument("operator and mesh disagree on node count");
    if (problem.noise.delta < 0.0) throw std::invalid_argument("noise level must be nonnegative");
    validate_threshold_spec(problem.threshold);
}

}  // namespace

void validate_filter_config(const FilterConfig& config) {
    if (config.ensemble_size < 2) throw std::invalid_argument("ensemble size must be >= 2");
    if (config.max_iterations < 0) throw std::invalid_argument("iteration count must be >= 0");
    if (config.discrepancy_tau < 1.0) throw std::invalid_argument("discrepancy tau must be >= 1");
    if (config.threads < 0) throw std::invalid_argument("thread count must be >= 0");
    if (config.algorithm == FilterAlgorithm::PredictedData &&
        config.primary_estimate == EstimateVariant::MeanOfMaps)
        throw std::invalid_argument("mean-of-maps estimate exists only for the augmented-source filter");
}

void predict(Ensemble& ensemble, const InversionProblem& problem, int threads,
             double* scale_out) {
    validate_problem(problem);
    const int J = ensemble.size();
    std::vector<double> scales(J, 1.0);
    const TriMesh& mesh = *problem.mesh;
    const StackedForwardOperator& op = *problem.op;
    if (ensemble.algorithm == FilterAlgorithm::AugmentedSource) {
        parallel_for(J, threads, [&](std::size_t j) {
            const NodalField f = ensemble.aux.col(j);
            const NodalField v = velocity_field(op, f, problem.data);
            NodalField phi = hj_step(mesh, ensemble.phi.col(j), v, problem.hj, &scales[j]);
            if (problem.hj.reinitialize) phi = reinitialize_signed_distance(mesh, phi);
            ensemble.phi.col(j) = phi;
            ensemble.aux.col(j) = level_set_map(phi, problem.threshold);
        });
    } else {
        parallel_for(J, threads, [&](std::size_t j) {
            const NodalField phi = evolve(op, mesh, ensemble.phi.col(j), problem.data,
                                          problem.threshold, problem.hj, 1, &scales[j]);
            ensemble.phi.col(j) = phi;
            ensemble.aux.col(j) =
                real_stack(apply_forward(op, level_set_map(phi, problem.threshold)));
        });
    }
    if (scale_out) {
        double s = 1.0;
        for (double v : scales) s = std::min(s, v);
        *scale_out = s;
    }
}

EnsembleStats ensemble_stats(const Ensemble& ensemble) {
    if (ensemble.size() < 2) throw std::invalid_argument("ensemble statistics require J >= 2");
    EnsembleStats stats;
    stats.mean_phi = ensemble.phi.rowwise().mean();
    stats.mean_aux = ensemble.aux.rowwise().mean();
    stats.anom_phi = ensemble.phi.colwise() - stats.mean_phi;
    stats.anom_aux = ensemble.aux.colwise() - stats.mean_aux;
    return stats;
}

Eigen::MatrixXd kalman_weights(const Eigen::MatrixXd& data_anom, const Eigen::MatrixXd& obs,
                               const Eigen::MatrixXd& targets, double delta) {
    const Eigen::Index m = data_anom.rows();
    const Eigen::Index J = data_anom.cols();
    if (obs.rows() != m || targets.rows() != m || obs.cols() != J || targets.cols() != J)
        throw std::invalid_argument("kalman_weights shape mismatch");
    if (delta < 0.0) throw std::invalid_argument("noise level must be nonnegative");
    Eigen::MatrixXd s = (data_anom * data_anom.transpose()) / static_cast<double>(J);
    s.diagonal().array() += delta * delta;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("data covariance factorization failed");
    const auto d = ldlt.vectorD();
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0) || d.minCoeff() <= dmax * 1e-14)
        throw std::runtime_error("singular data covariance (zero noise with rank-deficient ensemble)");
    return data_anom.transpose() * ldlt.solve(targets - obs);
}

void analysis_augmented_source(Ensemble& ensemble, const EnsembleStats& stats,
                               const Eigen::MatrixXd& h_real, const Eigen::MatrixXd& targets,
                               const NoiseModel& noise) {
    if (ensemble.algorithm != FilterAlgorithm::AugmentedSource)
        throw std::invalid_argument("ensemble does not carry source particles");
    const double j_inv = 1.0 / ensemble.size();
    const Eigen::MatrixXd data_anom = h_real * stats.anom_aux;
    const Eigen::MatrixXd obs = h_real * ensemble.aux;
    const Eigen::MatrixXd c = kalman_weights(data_anom, obs, targets, noise.delta);
    ensemble.phi += j_inv * (stats.anom_phi * c);
    ensemble.aux += j_inv * (stats.anom_aux * c);
}

void analysis_predicted_data(Ensemble& ensemble, const EnsembleStats& stats,
                             const Eigen::MatrixXd& targets, const NoiseModel& noise) {
    if (ensemble.algorithm != FilterAlgorithm::PredictedData)
        throw std::invalid_argument("ensemble does not carry predicted-data particles");
    const double j_inv = 1.0 / ensemble.size();
    const Eigen::MatrixXd c =
        kalman_weights(stats.anom_aux, ensemble.aux, targets, noise.delta);
    ensemble.phi += j_inv * (stats.anom_phi * c);
}

bool stopping_rule(double misfit, const NoiseModel& noise, int data_dim,
                   const FilterConfig& config) {
    if (misfit < 0.0) throw std::invalid_argument("misfit must be nonnegative");
    if (data_dim <= 0) throw std::invalid_argument("data dimension must be positive");
    return misfit <= config.discrepancy_tau * noise.delta * std::sqrt(data_dim);
}

double relative_l2_error(const NodalField& estimate, const NodalField& truth,
                         const Eigen::VectorXd& lumped_weights) {
    if (estimate.size() != truth.size() || truth.size() != lumped_weights.size())
        throw std::invalid_argument("field length mismatch");
    const double den = truth.cwiseAbs2().dot(lumped_weights);
    if (!(den > 0.0)) throw std::invalid_argument("truth field has zero norm");
    const double num = (estimate - truth).cwiseAbs2().dot(lumped_weights);
    return std::sqrt(num / den);
}

FilterResult run_filter(const FilterConfig& config, const InversionProblem& problem,
                        std::uint64_t seed, const NodalField* truth) {
    validate_filter_config(config);
    validate_problem(problem);
    const TriMesh& mesh = *problem.mesh;
    const StackedForwardOperator& op = *problem.op;
    const int J = config.ensemble_size;
    const int data_dim = op.real_dim();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    const Eigen::MatrixXd h_real = real_stacked_matrix(op);
    const Eigen::VectorXd b_real = real_stack(problem.data);
    const Eigen::VectorXd lumped = nodal_lumped_areas(mesh);
    const MaternSampler sampler(mesh, problem.prior);

    Ensemble ensemble;
    ensemble.algorithm = config.algorithm;
    ensemble.phi.resize(mesh.node_count(), J);
    const bool augmented = config.algorithm == FilterAlgorithm::AugmentedSource;
    ensemble.aux.resize(augmented ? mesh.node_count() : data_dim, J);
    for (int j = 0; j < J; ++j) {
        const NodalField phi = sampler.sample(derive_seed(seed, static_cast<std::uint64_t>(j)));
        ensemble.phi.col(j) = phi;
        const NodalField f = level_set_map(phi, problem.threshold);
        if (augmented)
            ensemble.aux.col(j) = f;
        else
            ensemble.aux.col(j) = real_stack(apply_forward(op, f));
    }

    FilterResult result;
    auto record = [&](int iteration, double hj_scale) {
        IterationRecord rec;
        rec.iteration = iteration;
        rec.hj_scale_min = hj_scale;
        result.phi_mean = ensemble.phi.rowwise().mean();
        result.f_map_of_mean = level_set_map(result.phi_mean, problem.threshold);
        rec.misfit_map_of_mean = (h_real * result.f_map_of_mean - b_real).norm();
        rec.rel_error_map_of_mean =
            truth ? relative_l2_error(result.f_map_of_mean, *truth, lumped) : nan;
        if (augmented) {
            result.f_mean_of_maps = ensemble.aux.rowwise().mean();
            rec.misfit_mean_of_maps = (h_real * result.f_mean_of_maps - b_real).norm();
            rec.rel_error_mean_of_maps =
                truth ? relative_l2_error(result.f_mean_of_maps, *truth, lumped) : nan;
        } else {
            rec.misfit_mean_of_maps = nan;
            rec.rel_error_mean_of_maps = nan;
        }
        result.history.push_back(rec);
        return config.primary_estimate == EstimateVariant::MapOfMean ? rec.misfit_map_of_mean
                                                                     : rec.misfit_mean_of_maps;
    };

    record(0, 1.0);
    for (int it = 1; it <= config.max_iterations; ++it) {
        double scale = 1.0;
        predict(ensemble, problem, config.threads, &scale);
        const EnsembleStats stats = ensemble_stats(ensemble);
        Eigen::MatrixXd targets = b_real.replicate(1, J);
        if (config.perturb_observations && problem.noise.delta > 0.0) {
            NormalStream stream(derive_seed(seed, kPerturbBase + static_cast<std::uint64_t>(it)));
            for (int j = 0; j < J; ++j)
                for (int r = 0; r < data_dim; ++r)
                    targets(r, j) += problem.noise.delta * stream.next();
        }
        if (augmented)
            analysis_augmented_source(ensemble, stats, h_real, targets, problem.noise);
        else
            analysis_predicted_data(ensemble, stats, targets, problem.noise);
        const double primary_misfit = record(it, scale);
        result.iterations_run = it;
        if (stopping_rule(primary_misfit, problem.noise, data_dim, config)) {
            result.stopped_by_discrepancy = true;
            break;
        }
    }
    return result;
}

}  // namespace lsenkf
