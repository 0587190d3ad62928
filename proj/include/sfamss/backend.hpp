#pragma once

// Backend selection by name, as recorded in the deployment config.

#include <memory>
#include <optional>
#include <string>

#include "sfamss/sim_backend.hpp"
#ifdef SFAMSS_HAVE_OPENSSL
#include "sfamss/openssl_backend.hpp"
#endif

namespace sfamss {

struct UnknownBackendError : std::invalid_argument {
  explicit UnknownBackendError(const std::string& name)
      : std::invalid_argument("unknown crypto backend: " + name) {}
};

inline std::shared_ptr<CryptoBackend> make_backend(const std::string& name,
                                                   std::optional<std::uint64_t> seed) {
  if (name == "sim") {
    if (seed) return std::make_shared<SimBackend>(*seed);
    return std::make_shared<SimBackend>(std::make_unique<SystemRandom>());
  }
#ifdef SFAMSS_HAVE_OPENSSL
  if (name == "openssl") return std::make_shared<OpenSslBackend>();
#endif
  throw UnknownBackendError(name);
}

inline bool backend_available(const std::string& name) {
  if (name == "sim") return true;
#ifdef SFAMSS_HAVE_OPENSSL
  if (name == "openssl") return true;
#endif
  return false;
}

}  // namespace sfamss
