#pragma once

#include <stdexcept>
#include <string>

namespace reglab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised by the integrators. `time` is where the failure was detected;
// `gain` carries the guidance gain at that time when the caller supplied one.
class IntegrationError : public Error {
public:
    enum class Kind { NonFinite, StepUnderflow };

    IntegrationError(Kind kind, double time, double gain, const std::string& what)
        : Error(what), kind_(kind), time_(time), gain_(gain) {}

    Kind kind() const { return kind_; }
    double time() const { return time_; }
    double gain() const { return gain_; }

private:
    Kind kind_;
    double time_;
    double gain_;
};

}  // namespace reglab
