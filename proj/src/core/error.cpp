#include "procsight/error.hpp"

namespace procsight {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::parse: return "parse error";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::unsupported: return "unsupported event";
    case ErrorKind::ordering: return "ordering error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::partition: return "partition error";
    case ErrorKind::precondition: return "precondition violation";
    case ErrorKind::config: return "config error";
    case ErrorKind::corruption: return "corruption error";
    case ErrorKind::version: return "version error";
    case ErrorKind::range: return "range error";
    case ErrorKind::io: return "i/o error";
    }
    return "error";
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::config:
    case ErrorKind::precondition:
    case ErrorKind::version:
    case ErrorKind::range:
        return 2;
    case ErrorKind::numeric:
        return 4;
    default:
        return 3;
    }
}

} // namespace procsight
