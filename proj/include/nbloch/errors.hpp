#pragma once

#include <stdexcept>
#include <string>

namespace nbloch {

// Base for all domain errors.  `name()` is a stable machine-readable
// identifier emitted by the CLI on the diagnostic stream.
class error : public std::runtime_error {
public:
    error(std::string name, const std::string& what)
        : std::runtime_error(what), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

#define NBLOCH_DEFINE_ERROR(cls, id)                                          \
    class cls : public error {                                                \
    public:                                                                   \
        explicit cls(const std::string& what) : error(id, what) {}            \
    }

NBLOCH_DEFINE_ERROR(dimension_error, "dimension-error");
NBLOCH_DEFINE_ERROR(nonconvergence_error, "non-convergence-error");
NBLOCH_DEFINE_ERROR(insufficient_sampling_error, "insufficient-sampling-error");
NBLOCH_DEFINE_ERROR(malformed_contour_error, "malformed-contour-error");
NBLOCH_DEFINE_ERROR(invalid_params_error, "invalid-params-error");
NBLOCH_DEFINE_ERROR(degenerate_state_error, "degenerate-state-error");
NBLOCH_DEFINE_ERROR(degenerate_dispersion_error, "degenerate-dispersion-error");
NBLOCH_DEFINE_ERROR(ambiguous_classification_error, "ambiguous-classification-error");
NBLOCH_DEFINE_ERROR(singular_input_error, "singular-input-error");
NBLOCH_DEFINE_ERROR(exceptional_point_error, "exceptional-point-error");
NBLOCH_DEFINE_ERROR(coalescence_error, "coalescence-error");
NBLOCH_DEFINE_ERROR(grid_error, "grid-error");
NBLOCH_DEFINE_ERROR(insufficient_statistics_error, "insufficient-statistics-error");
NBLOCH_DEFINE_ERROR(io_error, "io-error");

#undef NBLOCH_DEFINE_ERROR

} // namespace nbloch
