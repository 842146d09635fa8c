#include "kcluster/instance.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "kcluster/errors.hpp"

namespace kcluster {

using nlohmann::json;

void Instance::validate() const {
    if (clients.empty()) throw InputError("instance: no clients");
    if (facilities.empty()) throw InputError("instance: no facilities");
    if (k < 1) throw InputError("instance: k must be >= 1");
    if (static_cast<std::size_t>(k) > facilities.size()) throw InputError("instance: k exceeds |F|");
    if (p < 1.0) throw InputError("instance: p must be >= 1");
    for (std::size_t id : clients) {
        if (id >= metric.size()) throw InputError("instance: client point id out of range");
    }
    for (std::size_t id : facilities) {
        if (id >= metric.size()) throw InputError("instance: facility point id out of range");
    }
}

namespace {

void reject_unknown_fields(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* name : allowed) {
            if (it.key() == name) {
                ok = true;
                break;
            }
        }
        if (!ok) throw InputError(std::string("instance ") + where + ": unknown field \"" + it.key() + "\"");
    }
}

std::vector<std::size_t> parse_indices(const json& j, const char* what) {
    std::vector<std::size_t> out;
    for (const auto& v : j) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw InputError(std::string("instance: ") + what + " must be nonnegative indices");
        }
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

std::vector<std::vector<double>> parse_coords(const json& j, const char* what) {
    std::vector<std::vector<double>> out;
    for (const auto& row : j) {
        if (!row.is_array()) throw InputError(std::string("instance: ") + what + " must be coordinate lists");
        out.push_back(row.get<std::vector<double>>());
    }
    return out;
}

}  // namespace

Instance Instance::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("instance: malformed json: ") + e.what());
    }
    reject_unknown_fields(j, {"p", "k", "metric"}, "root");
    if (!j.contains("p") || !j.contains("k") || !j.contains("metric")) {
        throw InputError("instance: required fields are p, k, metric");
    }
    Instance inst;
    inst.p = j.at("p").get<double>();
    inst.k = j.at("k").get<int>();
    const json& m = j.at("metric");
    reject_unknown_fields(m, {"kind", "dim", "clients", "facilities", "matrix"}, "metric");
    const std::string kind = m.at("kind").get<std::string>();
    if (kind == "euclidean") {
        if (m.contains("matrix")) throw InputError("instance metric: \"matrix\" not allowed for euclidean kind");
        auto cc = parse_coords(m.at("clients"), "clients");
        auto fc = parse_coords(m.at("facilities"), "facilities");
        std::size_t dim = m.contains("dim") ? m.at("dim").get<std::size_t>() : (cc.empty() ? 0 : cc[0].size());
        std::vector<std::vector<double>> points;
        points.reserve(cc.size() + fc.size());
        for (auto& c : cc) {
            if (c.size() != dim) throw InputError("instance metric: client coordinate dimension mismatch");
            points.push_back(std::move(c));
        }
        for (auto& f : fc) {
            if (f.size() != dim) throw InputError("instance metric: facility coordinate dimension mismatch");
            points.push_back(std::move(f));
        }
        inst.metric = MetricSpace::euclidean(std::move(points));
        inst.clients.resize(cc.size());
        std::iota(inst.clients.begin(), inst.clients.end(), 0);
        inst.facilities.resize(fc.size());
        std::iota(inst.facilities.begin(), inst.facilities.end(), cc.size());
    } else if (kind == "matrix") {
        if (m.contains("dim")) throw InputError("instance metric: \"dim\" not allowed for matrix kind");
        if (!m.contains("matrix")) throw InputError("instance metric: matrix kind requires \"matrix\"");
        auto matrix = m.at("matrix").get<std::vector<std::vector<double>>>();
        inst.metric = MetricSpace::from_matrix(std::move(matrix));
        inst.clients = parse_indices(m.at("clients"), "clients");
        inst.facilities = parse_indices(m.at("facilities"), "facilities");
    } else {
        throw InputError("instance metric: kind must be \"euclidean\" or \"matrix\"");
    }
    inst.validate();
    return inst;
}

Instance Instance::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("instance: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

std::string Instance::to_json_string() const {
    json m;
    if (metric.kind() == MetricKind::Euclidean) {
        m["kind"] = "euclidean";
        m["dim"] = metric.dim();
        json cc = json::array();
        for (std::size_t id : clients) cc.push_back(metric.coords(id));
        json fc = json::array();
        for (std::size_t id : facilities) fc.push_back(metric.coords(id));
        m["clients"] = std::move(cc);
        m["facilities"] = std::move(fc);
    } else {
        m["kind"] = "matrix";
        json rows = json::array();
        for (std::size_t a = 0; a < metric.size(); ++a) {
            json row = json::array();
            for (std::size_t b = 0; b < metric.size(); ++b) row.push_back(metric.distance(a, b));
            rows.push_back(std::move(row));
        }
        m["matrix"] = std::move(rows);
        m["clients"] = clients;
        m["facilities"] = facilities;
    }
    json j;
    j["p"] = p;
    j["k"] = k;
    j["metric"] = std::move(m);
    return j.dump();
}

void Instance::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("instance: cannot write " + path);
    out << to_json_string() << "\n";
}

FacilityNeighborOrder::FacilityNeighborOrder(const Instance& inst) {
    const std::size_t n = inst.num_facilities();
    order_.resize(n);
    std::vector<std::pair<double, std::uint32_t>> buf(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) buf[j] = {inst.ff_distance(i, j), static_cast<std::uint32_t>(j)};
        std::sort(buf.begin(), buf.end());
        auto& ord = order_[i];
        ord.reserve(n);
        for (const auto& [d, j] : buf) ord.push_back(j);
    }
}

}  // namespace kcluster
