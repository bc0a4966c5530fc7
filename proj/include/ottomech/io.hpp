#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace ottomech {

// All output goes through write-then-rename so a failed run never leaves
// a partial file behind.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

// 9 significant digits everywhere keeps files diffable across runs.
inline std::string fmt_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

class CsvBuilder {
  public:
    explicit CsvBuilder(const std::string& header) { buf_ = header + "\n"; }

    CsvBuilder& cell(double v) {
        sep();
        buf_ += fmt_g9(v);
        return *this;
    }
    CsvBuilder& cell(const std::string& v) {
        sep();
        buf_ += v;
        return *this;
    }
    CsvBuilder& cell(long long v) {
        sep();
        buf_ += std::to_string(v);
        return *this;
    }
    void end_row() {
        buf_ += "\n";
        first_ = true;
    }
    const std::string& str() const { return buf_; }

  private:
    void sep() {
        if (!first_) buf_ += ",";
        first_ = false;
    }
    std::string buf_;
    bool first_ = true;
};

} // namespace ottomech
