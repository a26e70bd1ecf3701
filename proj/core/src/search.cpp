#include <treeseed/search.hpp>

#include <cmath>
#include <limits>

namespace treeseed {

ParamSpec ParamSpec::uniform(double lo, double hi) {
    if (!(lo < hi)) throw ArgumentError("uniform parameter: lo must be < hi");
    ParamSpec spec;
    spec.kind = Kind::uniform;
    spec.lo = lo;
    spec.hi = hi;
    return spec;
}

ParamSpec ParamSpec::log_uniform(double lo, double hi) {
    if (!(lo < hi)) throw ArgumentError("log-uniform parameter: lo must be < hi");
    if (lo <= 0.0) throw ArgumentError("log-uniform parameter: lo must be positive");
    ParamSpec spec;
    spec.kind = Kind::log_uniform;
    spec.lo = lo;
    spec.hi = hi;
    return spec;
}

ParamSpec ParamSpec::integer(long lo, long hi) {
    if (lo > hi) throw ArgumentError("integer parameter: lo must be <= hi");
    ParamSpec spec;
    spec.kind = Kind::integer;
    spec.ilo = lo;
    spec.ihi = hi;
    return spec;
}

ParamSpec ParamSpec::categorical(std::vector<std::string> values) {
    if (values.empty()) throw ArgumentError("categorical parameter: empty choice set");
    ParamSpec spec;
    spec.kind = Kind::categorical;
    spec.cats = std::move(values);
    return spec;
}

double param_as_double(const ParamMap& params, const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end()) throw ArgumentError("missing parameter '" + key + "'");
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    if (const auto* i = std::get_if<long>(&it->second)) return static_cast<double>(*i);
    throw ArgumentError("parameter '" + key + "' is not numeric");
}

long param_as_int(const ParamMap& params, const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end()) throw ArgumentError("missing parameter '" + key + "'");
    if (const auto* i = std::get_if<long>(&it->second)) return *i;
    throw ArgumentError("parameter '" + key + "' is not an integer");
}

std::string param_as_string(const ParamMap& params, const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end()) throw ArgumentError("missing parameter '" + key + "'");
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw ArgumentError("parameter '" + key + "' is not categorical");
}

ParamMap sample_config(const SearchSpace& space, Rng& rng) {
    ParamMap config;
    for (const auto& [name, spec] : space.dims) {
        switch (spec.kind) {
            case ParamSpec::Kind::uniform:
                config[name] = rng.uniform(spec.lo, spec.hi);
                break;
            case ParamSpec::Kind::log_uniform:
                config[name] = std::exp(rng.uniform(std::log(spec.lo), std::log(spec.hi)));
                break;
            case ParamSpec::Kind::integer:
                config[name] = spec.ilo + static_cast<long>(rng.uniform_int(
                                              static_cast<std::uint64_t>(spec.ihi - spec.ilo + 1)));
                break;
            case ParamSpec::Kind::categorical:
                config[name] = spec.cats[static_cast<std::size_t>(
                    rng.uniform_int(spec.cats.size()))];
                break;
        }
    }
    return config;
}

SearchResult random_search(const SearchSpace& space, int budget,
                           const std::function<double(const ParamMap&)>& objective,
                           std::uint64_t seed, bool parallel) {
    if (budget < 1) throw ArgumentError("random_search: budget must be at least 1");
    SearchResult result;
    result.log.resize(static_cast<std::size_t>(budget));

    parallel_for(
        static_cast<std::size_t>(budget),
        [&](std::size_t i) {
            Trial& trial = result.log[i];
            trial.index = static_cast<int>(i);
            Rng rng(derive_seed(seed, i));
            trial.config = sample_config(space, rng);
            try {
                trial.objective = objective(trial.config);
                if (!std::isfinite(trial.objective))
                    throw NumericError("objective returned a non-finite value");
            } catch (const std::exception& e) {
                trial.failed = true;
                trial.error = e.what();
            }
        },
        parallel ? 0 : 1);

    result.best_objective = std::numeric_limits<double>::infinity();
    for (const Trial& trial : result.log) {
        if (trial.failed) continue;
        if (result.best_index < 0 || trial.objective < result.best_objective) {
            result.best_index = trial.index;
            result.best_objective = trial.objective;
            result.best = trial.config;
        }
    }
    if (result.best_index < 0)
        throw NumericError("random_search: every trial failed (" +
                           (result.log.empty() ? std::string("no trials") : result.log.front().error) +
                           ")");
    return result;
}

}  // namespace treeseed
