#include "mcot/errors.hpp"

namespace mcot {

const char* to_string(BackendError::Kind kind) {
    switch (kind) {
        case BackendError::Kind::transport: return "transport";
        case BackendError::Kind::protocol: return "protocol";
        case BackendError::Kind::timeout: return "timeout";
        case BackendError::Kind::config: return "config";
    }
    return "unknown";
}

}  // namespace mcot
