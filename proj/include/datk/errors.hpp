#pragma once

#include <stdexcept>
#include <string>

namespace datk {

// Error taxonomy shared by library and CLI. Validation problems (bad
// shapes, configs, file formats, protocol misuse) map to CLI exit code 1,
// unexpected runtime failures to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct IntegrityError : Error { using Error::Error; };
struct ProtocolError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };

}  // namespace datk
