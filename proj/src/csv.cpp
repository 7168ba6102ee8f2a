#include "pofbm/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pofbm::csv {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Writer::Writer(const std::string& path, const std::string& header) : path_(path) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw IOError("cannot open " + path + " for writing: " + std::strerror(errno));
    std::fputs(header.c_str(), f_);
    std::fputc('\n', f_);
}

Writer::~Writer() {
    if (f_) std::fclose(f_);
}

void Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) std::fputc(',', f_);
        std::fputs(fields[i].c_str(), f_);
    }
    std::fputc('\n', f_);
}

namespace {
std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}
}  // namespace

Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot open " + path);
    Table table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    if (first) throw MalformedCSV(path + " is empty");
    return table;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw MalformedCSV("cannot parse '" + s + "' as a number");
    return v;
}

long long parse_int(const std::string& s) {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw MalformedCSV("cannot parse '" + s + "' as an integer");
    return v;
}

}  // namespace pofbm::csv
