#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace escrowsim {

enum class Errc {
    // ledger
    DuplicateAddress,
    UnknownSender,
    UnknownAddress,
    BadNonce,
    CursorBeyondHead,
    BadSeed,
    // content store
    BadChurnParams,
    NodeOffline,
    UnknownNode,
    // config / io / formats
    ConfigInvalid,
    IoError,
    MalformedTrace,
    Decode,
    // arithmetic
    Overflow,
    // forensics
    NoDeployment,
};

std::string_view to_string(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

inline std::string_view to_string(Errc c) {
    switch (c) {
        case Errc::DuplicateAddress: return "DuplicateAddress";
        case Errc::UnknownSender: return "UnknownSender";
        case Errc::UnknownAddress: return "UnknownAddress";
        case Errc::BadNonce: return "BadNonce";
        case Errc::CursorBeyondHead: return "CursorBeyondHead";
        case Errc::BadSeed: return "BadSeed";
        case Errc::BadChurnParams: return "BadChurnParams";
        case Errc::NodeOffline: return "NodeOffline";
        case Errc::UnknownNode: return "UnknownNode";
        case Errc::ConfigInvalid: return "ConfigInvalid";
        case Errc::IoError: return "IoError";
        case Errc::MalformedTrace: return "MalformedTrace";
        case Errc::Decode: return "Decode";
        case Errc::Overflow: return "Overflow";
        case Errc::NoDeployment: return "NoDeployment";
    }
    return "UnknownError";
}

}  // namespace escrowsim
