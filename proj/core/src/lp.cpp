#include "kcluster/lp.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "kcluster/errors.hpp"
#include "kcluster/simplex.hpp"

namespace kcluster {

using nlohmann::json;

namespace {

// Greedy refill: optimal x given y, filling each client by ascending
// (distance, facility index).  Exact feasibility by construction.
void refill_assignment(const Instance& inst, FractionalSolution& sol) {
    const std::size_t nf = inst.num_facilities();
    sol.x.assign(inst.num_clients(), {});
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t j = 0; j < inst.num_clients(); ++j) {
        order.clear();
        for (std::size_t i = 0; i < nf; ++i) {
            if (sol.y[i] > 0) order.emplace_back(inst.cf_distance(j, i), i);
        }
        std::sort(order.begin(), order.end());
        double remaining = 1.0;
        for (const auto& [d, i] : order) {
            double take = std::min(remaining, sol.y[i]);
            if (take > 0) sol.x[j].push_back({i, take});
            remaining -= take;
            if (remaining <= 1e-15) break;
        }
        if (remaining > 1e-9) throw InfeasibleError("refill_assignment: openings sum below 1");
        // absorb float crumbs into the last share
        if (remaining != 0.0 && !sol.x[j].empty()) sol.x[j].back().value += remaining;
        std::sort(sol.x[j].begin(), sol.x[j].end(),
                  [](const FacilityShare& a, const FacilityShare& b) { return a.facility < b.facility; });
    }
}

}  // namespace

FractionalSolution solve_relaxation(const Instance& inst, const LpSolveOptions& opts) {
    inst.validate();
    const std::size_t nf = inst.num_facilities();
    const std::size_t nc = inst.num_clients();
    auto var_x = [nf](std::size_t j, std::size_t i) { return j * nf + i; };
    const std::size_t y_base = nc * nf;

    LpProblem lp;
    lp.num_vars = y_base + nf;
    lp.objective.assign(lp.num_vars, 0.0);
    for (std::size_t j = 0; j < nc; ++j) {
        for (std::size_t i = 0; i < nf; ++i) lp.objective[var_x(j, i)] = inst.cf_power(j, i);
    }
    for (std::size_t j = 0; j < nc; ++j) {
        LpProblem::Row row;
        row.relation = LpProblem::Relation::Equal;
        row.rhs = 1.0;
        for (std::size_t i = 0; i < nf; ++i) row.coeffs.emplace_back(var_x(j, i), 1.0);
        lp.rows.push_back(std::move(row));
    }
    for (std::size_t j = 0; j < nc; ++j) {
        for (std::size_t i = 0; i < nf; ++i) {
            LpProblem::Row row;
            row.relation = LpProblem::Relation::LessEqual;
            row.rhs = 0.0;
            row.coeffs.emplace_back(var_x(j, i), 1.0);
            row.coeffs.emplace_back(y_base + i, -1.0);
            lp.rows.push_back(std::move(row));
        }
    }
    {
        LpProblem::Row row;
        row.relation = LpProblem::Relation::LessEqual;
        row.rhs = inst.k;
        for (std::size_t i = 0; i < nf; ++i) row.coeffs.emplace_back(y_base + i, 1.0);
        lp.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < nf; ++i) {
        LpProblem::Row row;
        row.relation = LpProblem::Relation::LessEqual;
        row.rhs = 1.0;
        row.coeffs.emplace_back(y_base + i, 1.0);
        lp.rows.push_back(std::move(row));
    }

    LpResult res = solve_lp(lp, opts.max_iterations);
    if (res.status != LpResult::Status::Optimal) {
        throw SolverError("solve_relaxation: LP solver did not converge (status " +
                              std::to_string(static_cast<int>(res.status)) + ")",
                          res.iterations, res.residual);
    }

    FractionalSolution sol;
    sol.y.resize(nf);
    for (std::size_t i = 0; i < nf; ++i) sol.y[i] = std::clamp(res.solution[y_base + i], 0.0, 1.0) + 0.0;
    double total = sol.total_opening();
    if (total > inst.k) {
        const double scale = inst.k / total;
        for (double& v : sol.y) v *= scale;
    }
    refill_assignment(inst, sol);
    sol.validate(inst);
    return sol;
}

FractionalSolution assignment_for_opening(const Instance& inst, std::vector<double> y) {
    if (y.size() != inst.num_facilities()) throw InputError("assignment_for_opening: y size mismatch");
    FractionalSolution sol;
    sol.y = std::move(y);
    refill_assignment(inst, sol);
    return sol;
}

std::vector<std::size_t> SplitMap::map_back(const std::vector<std::size_t>& open_split) const {
    std::vector<std::size_t> out;
    out.reserve(open_split.size());
    for (std::size_t s : open_split) out.push_back(original.at(s));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SplitResult split_for_all_or_nothing(const Instance& inst, const FractionalSolution& sol) {
    sol.validate(inst);
    const std::size_t nf = inst.num_facilities();
    const std::size_t nc = inst.num_clients();
    constexpr double kMergeTol = 1e-12;

    // Per facility: distinct positive x-levels across clients, ascending.
    std::vector<std::vector<double>> levels(nf);
    for (std::size_t j = 0; j < nc; ++j) {
        for (const auto& share : sol.x[j]) {
            if (share.value > kMergeTol) levels[share.facility].push_back(share.value);
        }
    }

    SplitResult out;
    out.solution.x.assign(nc, {});
    std::vector<std::vector<std::pair<double, std::size_t>>> cut_of(nf);  // (level, split index)
    for (std::size_t i = 0; i < nf; ++i) {
        auto& ls = levels[i];
        std::sort(ls.begin(), ls.end());
        ls.erase(std::unique(ls.begin(), ls.end(),
                             [](double a, double b) { return std::abs(a - b) <= kMergeTol; }),
                 ls.end());
        double prev = 0.0;
        for (double level : ls) {
            const std::size_t split = out.split.original.size();
            out.split.original.push_back(i);
            out.split.share.push_back(level - prev);
            cut_of[i].emplace_back(level, split);
            prev = level;
        }
        if (sol.y[i] - prev > kMergeTol || ls.empty()) {
            out.split.original.push_back(i);
            out.split.share.push_back(std::max(sol.y[i] - prev, 0.0));
        }
    }

    out.instance = inst;
    out.instance.facilities.clear();
    for (std::size_t s = 0; s < out.split.original.size(); ++s) {
        out.instance.facilities.push_back(inst.facilities[out.split.original[s]]);
    }
    out.solution.y = out.split.share;

    for (std::size_t j = 0; j < nc; ++j) {
        for (const auto& share : sol.x[j]) {
            if (share.value <= kMergeTol) continue;
            // The client uses every split of this facility up to its own level.
            for (const auto& [level, split] : cut_of[share.facility]) {
                if (level <= share.value + kMergeTol) {
                    if (out.solution.y[split] > 0) out.solution.x[j].push_back({split, out.solution.y[split]});
                } else {
                    break;
                }
            }
        }
        std::sort(out.solution.x[j].begin(), out.solution.x[j].end(),
                  [](const FacilityShare& a, const FacilityShare& b) { return a.facility < b.facility; });
    }
    out.solution.validate(out.instance);
    return out;
}

double NearestMassSet::d_av(std::size_t client) const {
    double s = 0.0;
    for (const auto& e : per_client.at(client)) s += e.y * e.distance;
    return s;
}

double NearestMassSet::d_max(std::size_t client) const {
    const auto& entries = per_client.at(client);
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.distance);
    return m;
}

double NearestMassSet::cost(const Instance& inst, std::size_t client) const {
    double s = 0.0;
    for (const auto& e : per_client.at(client)) s += e.y * inst.cf_power(client, e.facility);
    return s;
}

NearestMassResult nearest_mass_sets(const Instance& inst, const FractionalSolution& sol) {
    constexpr double kTol = 1e-12;
    double total = sol.total_opening();
    if (total < 1.0 - 1e-9) throw InfeasibleError("nearest_mass_sets: total opening below 1");

    NearestMassResult out;
    out.instance = inst;
    out.solution = sol;
    out.split.original.resize(inst.num_facilities());
    for (std::size_t i = 0; i < inst.num_facilities(); ++i) out.split.original[i] = i;
    out.split.share = sol.y;

    const std::size_t nc = inst.num_clients();
    std::vector<std::vector<std::size_t>> fj(nc);
    std::vector<std::pair<double, std::size_t>> order;

    for (std::size_t j = 0; j < nc; ++j) {
        auto& y = out.solution.y;
        order.clear();
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] > kTol) order.emplace_back(out.instance.cf_distance(j, i), i);
        }
        std::sort(order.begin(), order.end());
        double acc = 0.0;
        for (const auto& [d, i] : order) {
            const double need = 1.0 - acc;
            if (y[i] <= need + kTol) {
                fj[j].push_back(i);
                acc += y[i];
                if (acc >= 1.0 - kTol) break;
            } else {
                // Split the boundary facility: keep `need` on i, append the rest.
                const std::size_t fresh = y.size();
                const double rest = y[i] - need;
                y[i] = need;
                y.push_back(rest);
                out.instance.facilities.push_back(out.instance.facilities[i]);
                out.split.original.push_back(out.split.original[i]);
                out.split.share.push_back(rest);
                out.split.share[i] = need;
                // x shares on i move to the fresh part beyond `need`.
                for (std::size_t jj = 0; jj < nc; ++jj) {
                    for (auto& share : out.solution.x[jj]) {
                        if (share.facility == i && share.value > need + kTol) {
                            double excess = share.value - need;
                            share.value = need;
                            out.solution.x[jj].push_back({fresh, excess});
                        }
                    }
                }
                // Earlier clients holding the whole of i also hold the fresh part.
                for (std::size_t jj = 0; jj < j; ++jj) {
                    auto it = std::find(fj[jj].begin(), fj[jj].end(), i);
                    if (it != fj[jj].end()) fj[jj].push_back(fresh);
                }
                fj[j].push_back(i);
                acc = 1.0;
                break;
            }
        }
        if (acc < 1.0 - 1e-9) throw InfeasibleError("nearest_mass_sets: could not gather unit mass");
    }

    out.sets.per_client.resize(nc);
    for (std::size_t j = 0; j < nc; ++j) {
        auto& entries = out.sets.per_client[j];
        for (std::size_t i : fj[j]) {
            entries.push_back({i, out.solution.y[i], out.instance.cf_distance(j, i)});
        }
        std::sort(entries.begin(), entries.end(), [](const NearestMassSet::Entry& a, const NearestMassSet::Entry& b) {
            return a.distance < b.distance || (a.distance == b.distance && a.facility < b.facility);
        });
    }
    return out;
}

std::string solution_to_json_string(const Instance& inst, const FractionalSolution& sol) {
    json j;
    j["y"] = sol.y;
    json xs = json::array();
    for (std::size_t c = 0; c < sol.x.size(); ++c) {
        for (const auto& share : sol.x[c]) {
            xs.push_back(json::array({share.facility, c, share.value}));
        }
    }
    j["x"] = std::move(xs);
    j["objective"] = fractional_cost_unchecked(inst, sol);
    return j.dump();
}

FractionalSolution solution_from_json_string(const std::string& text, std::size_t num_facilities,
                                             std::size_t num_clients) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("solution: malformed json: ") + e.what());
    }
    FractionalSolution sol;
    sol.y = j.at("y").get<std::vector<double>>();
    if (sol.y.size() != num_facilities) throw InputError("solution: y size mismatch");
    sol.x.assign(num_clients, {});
    for (const auto& entry : j.at("x")) {
        const std::size_t i = entry.at(0).get<std::size_t>();
        const std::size_t c = entry.at(1).get<std::size_t>();
        const double v = entry.at(2).get<double>();
        if (i >= num_facilities || c >= num_clients) throw InputError("solution: x index out of range");
        sol.x[c].push_back({i, v});
    }
    return sol;
}

}  // namespace kcluster
