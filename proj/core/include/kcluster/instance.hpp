#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kcluster/metric.hpp"

namespace kcluster {

// A k-clustering instance: clients C and facilities F index into a shared
// metric point set; assignment cost of client j to facility i is d(i,j)^p.
// Immutable after construction; safe for concurrent reads.
struct Instance {
    MetricSpace metric;
    std::vector<std::size_t> clients;     // point ids in `metric`
    std::vector<std::size_t> facilities;  // point ids in `metric`
    int k = 1;
    double p = 1.0;

    std::size_t num_clients() const { return clients.size(); }
    std::size_t num_facilities() const { return facilities.size(); }

    // Distance between client j and facility i (positions, not point ids).
    double cf_distance(std::size_t client, std::size_t facility) const {
        return metric.distance(clients.at(client), facilities.at(facility));
    }
    double cf_power(std::size_t client, std::size_t facility) const {
        return power_distance(metric, clients.at(client), facilities.at(facility), p);
    }
    double ff_distance(std::size_t a, std::size_t b) const {
        return metric.distance(facilities.at(a), facilities.at(b));
    }

    void validate() const;

    // Structured-text instance format:
    //   {"p": real, "k": int, "metric": {"kind": "euclidean"|"matrix", "dim": int?,
    //    "clients": [[coords]...]|indices, "facilities": [...], "matrix": [[...]]?}}
    // The loader rejects unknown fields.
    static Instance from_json_string(const std::string& text);
    static Instance load_file(const std::string& path);
    std::string to_json_string() const;
    void save_file(const std::string& path) const;
};

// For every facility: all facilities ordered by (distance, facility index).
// Built once per instance and reused across graph constructions.
class FacilityNeighborOrder {
  public:
    explicit FacilityNeighborOrder(const Instance& inst);
    const std::vector<std::uint32_t>& order(std::size_t facility) const { return order_.at(facility); }

  private:
    std::vector<std::vector<std::uint32_t>> order_;
};

}  // namespace kcluster
