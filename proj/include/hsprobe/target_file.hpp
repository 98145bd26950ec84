#pragma once

// Targets-file parsing. One target per line:
//     label host[:port][ sni=<name>]
// '#' starts a comment; blank lines are ignored; labels must be unique.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsprobe/prober.hpp"

namespace hsprobe {

class TargetFileError : public std::runtime_error {
public:
    struct Diagnostic {
        int line;
        std::string message;
    };

    TargetFileError(std::vector<Diagnostic> diagnostics, const std::string& what)
        : std::runtime_error(what), diagnostics(std::move(diagnostics)) {}

    std::vector<Diagnostic> diagnostics;
};

std::vector<TargetSpec> parse_targets_text(const std::string& text);
std::vector<TargetSpec> parse_targets_file(const std::filesystem::path& path);

// Single-target CLI argument: "label=host[:port][,sni=name]" or just
// "host[:port]" (label defaults to "host:port").
TargetSpec parse_target_arg(const std::string& arg);

}  // namespace hsprobe
