#include "kcluster/metric.hpp"

#include <cmath>
#include <string>

#include "kcluster/errors.hpp"

namespace kcluster {

namespace {
constexpr std::size_t kDenseCacheLimit = 4096;
}

MetricSpace MetricSpace::euclidean(std::vector<std::vector<double>> coords) {
    MetricSpace m;
    m.kind_ = MetricKind::Euclidean;
    m.size_ = coords.size();
    if (m.size_ == 0) throw InputError("euclidean metric: empty point set");
    m.dim_ = coords[0].size();
    if (m.dim_ == 0) throw InputError("euclidean metric: zero-dimensional points");
    for (const auto& c : coords) {
        if (c.size() != m.dim_) throw InputError("euclidean metric: inconsistent dimension");
        for (double v : c) {
            if (!std::isfinite(v)) throw InputError("euclidean metric: non-finite coordinate");
        }
    }
    m.coords_ = std::move(coords);
    if (m.size_ <= kDenseCacheLimit) {
        m.cache_.assign(m.size_ * m.size_, 0.0);
        for (std::size_t a = 0; a < m.size_; ++a) {
            for (std::size_t b = a + 1; b < m.size_; ++b) {
                double d = m.compute(a, b);
                m.cache_[a * m.size_ + b] = d;
                m.cache_[b * m.size_ + a] = d;
                if (d > m.max_distance_) m.max_distance_ = d;
            }
        }
        m.cached_ = true;
    }
    return m;
}

MetricSpace MetricSpace::from_matrix(std::vector<std::vector<double>> matrix) {
    MetricSpace m;
    m.kind_ = MetricKind::Matrix;
    m.size_ = matrix.size();
    if (m.size_ == 0) throw InputError("matrix metric: empty matrix");
    for (const auto& row : matrix) {
        if (row.size() != m.size_) throw InputError("matrix metric: matrix is not square");
    }
    for (std::size_t a = 0; a < m.size_; ++a) {
        if (matrix[a][a] != 0.0) throw InputError("matrix metric: nonzero diagonal at " + std::to_string(a));
        for (std::size_t b = 0; b < m.size_; ++b) {
            double d = matrix[a][b];
            if (!std::isfinite(d) || d < 0) throw InputError("matrix metric: invalid entry");
            if (d != matrix[b][a]) throw InputError("matrix metric: asymmetric entry at (" + std::to_string(a) + "," + std::to_string(b) + ")");
            if (d > m.max_distance_) m.max_distance_ = d;
        }
    }
    const double slack = 1e-9 * (m.max_distance_ > 1.0 ? m.max_distance_ : 1.0);
    for (std::size_t a = 0; a < m.size_; ++a) {
        for (std::size_t b = 0; b < m.size_; ++b) {
            for (std::size_t c = 0; c < m.size_; ++c) {
                if (matrix[a][c] > matrix[a][b] + matrix[b][c] + slack) {
                    throw InputError("matrix metric: triangle inequality violated for (" + std::to_string(a) + "," +
                                     std::to_string(b) + "," + std::to_string(c) + ")");
                }
            }
        }
    }
    m.cache_.assign(m.size_ * m.size_, 0.0);
    for (std::size_t a = 0; a < m.size_; ++a) {
        for (std::size_t b = 0; b < m.size_; ++b) m.cache_[a * m.size_ + b] = matrix[a][b];
    }
    m.cached_ = true;
    return m;
}

void MetricSpace::check_index(std::size_t a) const {
    if (a >= size_) {
        throw InputError("metric: unknown point index " + std::to_string(a) + " (size " + std::to_string(size_) + ")");
    }
}

double MetricSpace::compute(std::size_t a, std::size_t b) const {
    double s = 0.0;
    const auto& pa = coords_[a];
    const auto& pb = coords_[b];
    for (std::size_t i = 0; i < dim_; ++i) {
        double d = pa[i] - pb[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double MetricSpace::distance(std::size_t a, std::size_t b) const {
    check_index(a);
    check_index(b);
    if (cached_) return cache_[a * size_ + b];
    return compute(a, b);
}

const std::vector<double>& MetricSpace::coords(std::size_t a) const {
    if (kind_ != MetricKind::Euclidean) throw InputError("metric: coordinates requested from a matrix metric");
    check_index(a);
    return coords_[a];
}

double power_distance(const MetricSpace& metric, std::size_t a, std::size_t b, double p) {
    if (p < 1.0) throw ConfigError("power_distance: p must be >= 1");
    double d = metric.distance(a, b);
    if (p == 1.0) return d;
    if (p == 2.0) return d * d;
    return std::pow(d, p);
}

}  // namespace kcluster
