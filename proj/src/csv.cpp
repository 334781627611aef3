#include "deltavar/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>

namespace deltavar {

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw Error("format_double: to_chars failed");
    return std::string(buf.data(), end);
}

void write_dataset(const std::filesystem::path& path, const Dataset& data, const std::string& comment) {
    data.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "# " << comment << "\nx,y\n";
    for (std::size_t n = 0; n < data.size(); ++n) {
        out << format_double(data.inputs[n]) << ',' << format_double(data.outputs[n]) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

double parse_double(std::string_view field, const std::filesystem::path& path, std::size_t line) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw ValidationError(path.string() + ":" + std::to_string(line) + ": not a number: '" + std::string(field) + "'");
    }
    return v;
}

}  // namespace

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            if (line != "x,y") throw ValidationError(path.string() + ": expected header 'x,y', got '" + line + "'");
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected two fields");
        }
        const std::string_view view(line);
        data.inputs.push_back(parse_double(view.substr(0, comma), path, line_no));
        data.outputs.push_back(parse_double(view.substr(comma + 1), path, line_no));
    }
    if (!header) throw ValidationError(path.string() + ": missing header");
    data.validate();
    return data;
}

}  // namespace deltavar
