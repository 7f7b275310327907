#pragma once

#include <cstddef>
#include <exception>
#include <string>
#include <type_traits>
#include <vector>

#include <omp.h>

#include "reglab/error.hpp"

namespace reglab {

/// Worker count resolution: explicit value if positive, else the OpenMP default.
inline int resolve_workers(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

class TrialError : public Error {
public:
    TrialError(std::size_t trial, const std::string& what)
        : Error("trial " + std::to_string(trial) + ": " + what), trial_(trial) {}
    std::size_t trial() const { return trial_; }

private:
    std::size_t trial_;
};

/// Reference implementation: trials in index order on the calling thread.
template <class Fn>
auto map_trials_serial(std::size_t n, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
    std::vector<std::invoke_result_t<Fn&, std::size_t>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        try {
            out.push_back(fn(i));
        } catch (const std::exception& e) {
            throw TrialError(i, e.what());
        }
    }
    return out;
}

/// OpenMP version. fn(i) must depend only on i (each trial derives its own
/// RNG stream), so the result vector is identical to map_trials_serial for
/// any worker count. The lowest failing trial index is reported.
template <class Fn>
auto map_trials(std::size_t n, Fn&& fn, int workers) -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
    using R = std::invoke_result_t<Fn&, std::size_t>;
    const int threads = resolve_workers(workers);
    if (threads == 1 || n < 2) return map_trials_serial(n, fn);

    std::vector<R> out(n);
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long i = 0; i < count; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            throw TrialError(i, e.what());
        }
    }
    return out;
}

}  // namespace reglab
