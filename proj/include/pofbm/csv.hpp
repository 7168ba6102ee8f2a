#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "pofbm/errors.hpp"

namespace pofbm::csv {

// %.17g: doubles survive a write/read round trip bit-exactly.
std::string format_double(double v);

class Writer {
public:
    Writer(const std::string& path, const std::string& header);
    ~Writer();
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void row(const std::vector<std::string>& fields);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::FILE* f_ = nullptr;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table read(const std::string& path);

double parse_double(const std::string& s);
long long parse_int(const std::string& s);

}  // namespace pofbm::csv
