#include "hsprobe/target_file.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hsprobe/tls_codec.hpp"

namespace hsprobe {

namespace {

// "host" or "host:port"; returns false on a bad port.
bool split_host_port(const std::string& spec, std::string& host,
                     std::uint16_t& port) {
    const auto colon = spec.rfind(':');
    if (colon == std::string::npos || spec.find(':') != colon) {
        host = spec;  // bare host (a second ':' would be an IPv6 literal)
        return !host.empty();
    }
    host = spec.substr(0, colon);
    const std::string port_str = spec.substr(colon + 1);
    if (host.empty() || port_str.empty())
        return false;
    long v = 0;
    try {
        std::size_t pos = 0;
        v = std::stol(port_str, &pos);
        if (pos != port_str.size())
            return false;
    } catch (const std::exception&) {
        return false;
    }
    if (v < 1 || v > 65535)
        return false;
    port = static_cast<std::uint16_t>(v);
    return true;
}

}  // namespace

std::vector<TargetSpec> parse_targets_text(const std::string& text) {
    std::vector<TargetSpec> targets;
    std::vector<TargetFileError::Diagnostic> errors;
    std::set<std::string> labels;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream fields(line);
        std::string label, endpoint, extra;
        if (!(fields >> label))
            continue;  // blank
        if (!(fields >> endpoint)) {
            errors.push_back({line_no, "expected 'label host[:port]'"});
            continue;
        }
        TargetSpec target;
        target.label = label;
        target.port = 443;
        if (!split_host_port(endpoint, target.host, target.port)) {
            errors.push_back({line_no, "bad host[:port]: '" + endpoint + "'"});
            continue;
        }
        bool bad = false;
        while (fields >> extra) {
            if (extra.rfind("sni=", 0) == 0) {
                const std::string name = extra.substr(4);
                if (!tls::is_valid_hostname(name)) {
                    errors.push_back({line_no, "invalid sni: '" + name + "'"});
                    bad = true;
                    break;
                }
                target.sni = name;
            } else {
                errors.push_back({line_no, "unrecognized field: '" + extra + "'"});
                bad = true;
                break;
            }
        }
        if (bad)
            continue;
        if (!labels.insert(label).second) {
            errors.push_back({line_no, "duplicate label: '" + label + "'"});
            continue;
        }
        targets.push_back(std::move(target));
    }

    if (!errors.empty()) {
        std::string what = "targets file has errors:";
        for (const auto& e : errors)
            what += "\n  line " + std::to_string(e.line) + ": " + e.message;
        throw TargetFileError(std::move(errors), what);
    }
    return targets;
}

std::vector<TargetSpec> parse_targets_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw TargetFileError({{0, "cannot open file"}},
                              "cannot open targets file: " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_targets_text(text.str());
}

TargetSpec parse_target_arg(const std::string& arg) {
    std::string rest = arg;
    TargetSpec target;
    target.port = 443;

    if (const auto eq = rest.find('='); eq != std::string::npos) {
        target.label = rest.substr(0, eq);
        rest = rest.substr(eq + 1);
    }
    if (const auto comma = rest.find(','); comma != std::string::npos) {
        const std::string opt = rest.substr(comma + 1);
        rest = rest.substr(0, comma);
        if (opt.rfind("sni=", 0) != 0 || !tls::is_valid_hostname(opt.substr(4)))
            throw std::invalid_argument("bad target option: '" + opt + "'");
        target.sni = opt.substr(4);
    }
    if (!split_host_port(rest, target.host, target.port))
        throw std::invalid_argument("bad target endpoint: '" + rest + "'");
    if (target.label.empty())
        target.label = target.host + ":" + std::to_string(target.port);
    return target;
}

}  // namespace hsprobe
