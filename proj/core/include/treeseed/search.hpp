#pragma once

#include <treeseed/common.hpp>
#include <treeseed/rng.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace treeseed {

struct ParamSpec {
    enum class Kind { uniform, log_uniform, integer, categorical };
    Kind kind = Kind::uniform;
    double lo = 0.0, hi = 1.0;       // real ranges
    long ilo = 0, ihi = 0;           // integer range, inclusive
    std::vector<std::string> cats;

    static ParamSpec uniform(double lo, double hi);
    static ParamSpec log_uniform(double lo, double hi);
    static ParamSpec integer(long lo, long hi);
    static ParamSpec categorical(std::vector<std::string> values);
};

/// Ordered so a fixed seed always samples dimensions in the same sequence.
struct SearchSpace {
    std::map<std::string, ParamSpec> dims;
};

using ParamValue = std::variant<double, long, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

double param_as_double(const ParamMap& params, const std::string& key);
long param_as_int(const ParamMap& params, const std::string& key);
std::string param_as_string(const ParamMap& params, const std::string& key);

struct Trial {
    int index = 0;
    ParamMap config;
    double objective = 0.0;
    bool failed = false;
    std::string error;
};

struct SearchResult {
    ParamMap best;
    double best_objective = 0.0;
    int best_index = -1;
    std::vector<Trial> log;
};

ParamMap sample_config(const SearchSpace& space, Rng& rng);

/// Draws `budget` i.i.d. configurations (trial i seeded from (seed, i)) and
/// returns the argmin of the objective, first occurrence on ties. Objective
/// exceptions mark the trial failed; it is excluded from the argmin. Trials
/// run on the worker pool; results are independent of scheduling.
SearchResult random_search(const SearchSpace& space, int budget,
                           const std::function<double(const ParamMap&)>& objective,
                           std::uint64_t seed, bool parallel = true);

}  // namespace treeseed
