#include "lsenkf/forward_operator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lsenkf/parallel.hpp"
#include "lsenkf/rng.hpp"
#include "lsenkf/special_functions.hpp"

namespace lsenkf {

WaveNumberGrid make_wavenumber_grid(double lo, double hi, int count, FrequencyUnit unit,
                                    double sound_speed) {
    if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("frequency range must satisfy 0 < lo <= hi");
    if (count < 1) throw std::invalid_argument("frequency count must be >= 1");
    if (count > 1 && !(hi > lo)) throw std::invalid_argument("need lo < hi for more than one frequency");
    if (!(sound_speed > 0.0)) throw std::invalid_argument("sound speed must be positive");

    WaveNumberGrid grid;
    grid.sound_speed_c0 = sound_speed;
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        const double value = std::exp(llo + t * (lhi - llo));
        double freq, k;
        if (unit == FrequencyUnit::Hertz) {
            freq = value;
            k = 2.0 * M_PI * freq / sound_speed;
        } else {
            k = value;
            freq = k * sound_speed / (2.0 * M_PI);
        }
        grid.frequencies_hz.push_back(freq);
        grid.wave_numbers.push_back(k);
        grid.amplitudes.push_back(1.0);
    }
    return grid;
}

StackedForwardOperator assemble_forward(const TriMesh& mesh, const ReceiverArray& receivers,
                                        const WaveNumberGrid& kgrid, const TriQuadRule& quad,
                                        int threads) {
    if (mesh.node_count() == 0 || mesh.element_count() == 0)
        throw std::invalid_argument("empty mesh");
    if (receivers.points.empty()) throw std::invalid_argument("no receivers");
    if (kgrid.count() == 0) throw std::invalid_argument("empty wave number grid");
    if (static_cast<int>(kgrid.amplitudes.size()) != kgrid.count())
        throw std::invalid_argument("amplitude list length mismatch");
    for (double k : kgrid.wave_numbers)
        if (!(k > 0.0)) throw std::invalid_argument("wave numbers must be positive");
    for (const Point2& rx : receivers.points)
        if (std::hypot(rx.x, rx.y) <= mesh.radius)
            throw std::invalid_argument("receiver inside or on the disk boundary");

    const int nrec = static_cast<int>(receivers.points.size());
    const int nnode = mesh.node_count();
    const int nfreq = kgrid.count();
    const int nq = static_cast<int>(quad.weights.size());

    // quadrature point coordinates and per-element scaled weights, shared by all rows
    std::vector<Point2> qpoint(static_cast<std::size_t>(mesh.element_count()) * nq);
    std::vector<double> qweight(qpoint.size());
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& el = mesh.elements[e];
        const double area = mesh.element_area(e);
        for (int q = 0; q < nq; ++q) {
            const auto& lam = quad.barycentric_points[q];
            Point2 p{0.0, 0.0};
            for (int i = 0; i < 3; ++i) {
                p.x += lam[i] * mesh.nodes[el[i]].x;
                p.y += lam[i] * mesh.nodes[el[i]].y;
            }
            qpoint[e * nq + q] = p;
            qweight[e * nq + q] = quad.weights[q] * area;
        }
    }

    StackedForwardOperator op;
    op.wave_numbers = kgrid.wave_numbers;
    op.receiver_count = nrec;
    op.node_count = nnode;
    op.per_k.assign(nfreq, Eigen::MatrixXcd::Zero(nrec, nnode));

    parallel_for(static_cast<std::size_t>(nfreq) * nrec, threads, [&](std::size_t row) {
        const int m = static_cast<int>(row) / nrec;
        const int j = static_cast<int>(row) % nrec;
        const double k = kgrid.wave_numbers[m];
        const double amp = kgrid.amplitudes[m];
        const Point2 rx = receivers.points[j];
        auto& mat = op.per_k[m];
        for (int e = 0; e < mesh.element_count(); ++e) {
            const auto& el = mesh.elements[e];
            for (int q = 0; q < nq; ++q) {
                const Point2 yq = qpoint[e * nq + q];
                const double dist = std::hypot(rx.x - yq.x, rx.y - yq.y);
                const std::complex<double> kernel =
                    amp * qweight[e * nq + q] * hankel_h0_first_kind(k * dist);
                const auto& lam = quad.barycentric_points[q];
                for (int i = 0; i < 3; ++i) mat(j, el[i]) += kernel * lam[i];
            }
        }
    });
    return op;
}

Eigen::VectorXcd apply_forward(const StackedForwardOperator& op, const NodalField& f) {
    if (f.size() != op.node_count) throw std::invalid_argument("source field length mismatch");
    Eigen::VectorXcd out(op.total_rows());
    for (int m = 0; m < op.frequency_count(); ++m)
        out.segment(m * op.receiver_count, op.receiver_count) = op.per_k[m] * f.cast<std::complex<double>>();
    return out;
}

NodalField apply_adjoint(const StackedForwardOperator& op, const Eigen::VectorXcd& residual) {
    if (residual.size() != op.total_rows()) throw std::invalid_argument("residual length mismatch");
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(op.node_count);
    for (int m = 0; m < op.frequency_count(); ++m)
        acc += op.per_k[m].adjoint() * residual.segment(m * op.receiver_count, op.receiver_count);
    return acc.real();
}

Eigen::VectorXd real_stack(const Eigen::VectorXcd& v) {
    Eigen::VectorXd out(2 * v.size());
    out.head(v.size()) = v.real();
    out.tail(v.size()) = v.imag();
    return out;
}

Eigen::VectorXcd complex_unstack(const Eigen::VectorXd& v) {
    if (v.size() % 2 != 0) throw std::invalid_argument("real-stacked vector must have even length");
    const Eigen::Index n = v.size() / 2;
    Eigen::VectorXcd out(n);
    out.real() = v.head(n);
    out.imag() = v.tail(n);
    return out;
}

Eigen::MatrixXd real_stacked_matrix(const StackedForwardOperator& op) {
    const int rows = op.total_rows();
    Eigen::MatrixXd h(2 * rows, op.node_count);
    for (int m = 0; m < op.frequency_count(); ++m) {
        h.block(m * op.receiver_count, 0, op.receiver_count, op.node_count) = op.per_k[m].real();
        h.block(rows + m * op.receiver_count, 0, op.receiver_count, op.node_count) =
            op.per_k[m].imag();
    }
    return h;
}

Eigen::VectorXcd generate_data(const StackedForwardOperator& op_fine, const NodalField& f_true,
                               const NoiseModel& noise, std::uint64_t seed) {
    if (noise.delta < 0.0) throw std::invalid_argument("noise level must be nonnegative");
    Eigen::VectorXcd b = apply_forward(op_fine, f_true);
    if (noise.delta > 0.0) {
        NormalStream stream(seed);
        // real parts first, then imaginary parts, matching the stacked layout
        for (Eigen::Index i = 0; i < b.size(); ++i)
            b(i).real(b(i).real() + noise.delta * stream.next());
        for (Eigen::Index i = 0; i < b.size(); ++i)
            b(i).imag(b(i).imag() + noise.delta * stream.next());
    }
    return b;
}

void export_observations(const Eigen::VectorXcd& values, int receiver_count,
                         const std::string& path) {
    if (receiver_count <= 0 || values.size() % receiver_count != 0)
        throw std::invalid_argument("observation vector length not a multiple of receiver count");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "freq_index,receiver_index,re,im\n";
    char line[128];
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const long m = i / receiver_count, j = i % receiver_count;
        std::snprintf(line, sizeof line, "%ld,%ld,%.17g,%.17g\n", m, j, values(i).real(),
                      values(i).imag());
        out << line;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

ObservationSet import_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string header;
    if (!std::getline(in, header) || header != "freq_index,receiver_index,re,im")
        throw std::runtime_error("bad observation CSV header in " + path);
    std::vector<std::complex<double>> rows;
    std::vector<std::pair<long, long>> index;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        long m, j;
        double re, im;
        if (std::sscanf(line.c_str(), "%ld,%ld,%lf,%lf", &m, &j, &re, &im) != 4)
            throw std::runtime_error("unparsable observation row: " + line);
        rows.emplace_back(re, im);
        index.emplace_back(m, j);
    }
    if (rows.empty()) throw std::runtime_error("no observation rows in " + path);
    long receivers = 0, freqs = 0;
    for (const auto& [m, j] : index) {
        receivers = std::max(receivers, j + 1);
        freqs = std::max(freqs, m + 1);
    }
    if (static_cast<long>(rows.size()) != receivers * freqs)
        throw std::runtime_error("observation CSV is not a complete freq x receiver grid");
    for (std::size_t r = 0; r < index.size(); ++r)
        if (index[r].first != static_cast<long>(r) / receivers ||
            index[r].second != static_cast<long>(r) % receivers)
            throw std::runtime_error("observation rows out of lexicographic order in " + path);
    ObservationSet set;
    set.receiver_count = static_cast<int>(receivers);
    set.values = Eigen::Map<Eigen::VectorXcd>(rows.data(), static_cast<Eigen::Index>(rows.size()));
    return set;
}

}  // namespace lsenkf
