#pragma once

#include <doctest.h>

#include <filesystem>
#include <limits>
#include <random>
#include <string>

namespace lpp::test {

/// Relative comparison. doctest's default scale of 1 turns Approx into an
/// absolute check for SI-sized values such as 4e-12 m. The tiny scale keeps
/// exact zeros comparable.
inline doctest::Approx Approx(double value)
{
    return doctest::Approx(value).scale(std::numeric_limits<double>::min());
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("lpp-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace lpp::test
