#pragma once

#include <stdexcept>
#include <string>

namespace hhscore {

/// Base class for every error raised by the library. `module()` names the
/// component that failed so the CLI can report it.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

#define HHSCORE_DEFINE_ERROR(Name, Module)                                 \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(Module, what) {}        \
  }

HHSCORE_DEFINE_ERROR(NormalizationError, "embedding_core");
HHSCORE_DEFINE_ERROR(DimensionError, "embedding_core");
HHSCORE_DEFINE_ERROR(EmptyInputError, "embedding_core");
HHSCORE_DEFINE_ERROR(ConfigError, "config");
HHSCORE_DEFINE_ERROR(DegenerateHouseholdError, "pair_builder");
HHSCORE_DEFINE_ERROR(NumericalError, "trainer");
HHSCORE_DEFINE_ERROR(SpeakerTooSmallError, "household_sim");
HHSCORE_DEFINE_ERROR(GuestPoolEmptyError, "household_sim");
HHSCORE_DEFINE_ERROR(NotFoundError, "household_sim");
HHSCORE_DEFINE_ERROR(CliqueSearchError, "household_sim");
HHSCORE_DEFINE_ERROR(DegenerateTrialSetError, "evaluation");
HHSCORE_DEFINE_ERROR(IoError, "io");
HHSCORE_DEFINE_ERROR(FormatError, "io");

#undef HHSCORE_DEFINE_ERROR

}  // namespace hhscore
