#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace tontine {

// All CSV numbers carry 6 significant decimal digits. printf %g rounds the
// binary value to nearest, ties to even, which is the serialization the CLI
// contract pins; output is byte-stable across runs.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::string header) { out_ = std::move(header); out_ += '\n'; }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ += ',';
            out_ += cells[i];
        }
        out_ += '\n';
    }

    const std::string& str() const { return out_; }

private:
    std::string out_;
};

} // namespace tontine
