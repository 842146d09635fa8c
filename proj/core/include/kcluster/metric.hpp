#pragma once

#include <cstddef>
#include <vector>

namespace kcluster {

enum class MetricKind { Euclidean, Matrix };

// Finite metric over an indexed point set.  Explicit matrices are validated
// for symmetry, zero diagonal and the triangle inequality on construction;
// Euclidean metrics satisfy these automatically.  Distances are cached as a
// dense matrix when the point count is at most 4096 and computed on demand
// otherwise.  Immutable after construction.
class MetricSpace {
  public:
    MetricSpace() = default;  // empty; filled via the factories

    static MetricSpace euclidean(std::vector<std::vector<double>> coords);
    static MetricSpace from_matrix(std::vector<std::vector<double>> matrix);

    std::size_t size() const { return size_; }
    MetricKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }

    double distance(std::size_t a, std::size_t b) const;

    // Coordinates of a point; only valid for Euclidean metrics.
    const std::vector<double>& coords(std::size_t a) const;

    // Largest pairwise distance seen during validation/caching; used to scale
    // triangle-inequality tolerances.
    double max_distance() const { return max_distance_; }

  private:
    void check_index(std::size_t a) const;
    double compute(std::size_t a, std::size_t b) const;

    MetricKind kind_ = MetricKind::Matrix;
    std::size_t size_ = 0;
    std::size_t dim_ = 0;
    std::vector<std::vector<double>> coords_;
    std::vector<double> cache_;  // row-major dense matrix when cached
    bool cached_ = false;
    double max_distance_ = 0.0;
};

// d(a, b)^p.  Throws InputError for an unknown point index, ConfigError for p < 1.
double power_distance(const MetricSpace& metric, std::size_t a, std::size_t b, double p);

}  // namespace kcluster
