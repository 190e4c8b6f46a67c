#include "scop/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scop/kg.hpp"

namespace scop {

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        auto t = trim(line);
        if (!t.empty() && t[0] != '#') {
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ParseError("expected `key = value` at line " + std::to_string(line_no), line_no);
            out[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

std::string format_key_values(const std::map<std::string, std::string>& values) {
    std::string out;
    for (const auto& [k, v] : values) out += k + " = " + v + "\n";
    return out;
}

}  // namespace scop
