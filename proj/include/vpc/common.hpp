#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vpc {

using Vec3 = std::array<double, 3>;
using Vec6 = std::array<double, 6>;
using Mat3 = std::array<double, 9>;   // row-major
using Mat6 = std::array<double, 36>;  // row-major

// Errors carry a short machine-readable code ("blow-up", "empty ensemble", ...).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail = "")
        : std::runtime_error(detail.empty() ? code : code + ": " + detail), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// Serial reference or OpenMP kernel.
enum class Exec { serial, parallel };

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

inline double norm6(const Vec6& z) {
    double s = 0;
    for (double c : z) s += c * c;
    return std::sqrt(s);
}
inline Vec3 pos(const Vec6& z) { return {z[0], z[1], z[2]}; }
inline Vec3 vel(const Vec6& z) { return {z[3], z[4], z[5]}; }
inline Vec6 join(const Vec3& x, const Vec3& v) { return {x[0], x[1], x[2], v[0], v[1], v[2]}; }

inline Mat6 identity6() {
    Mat6 m{};
    for (int i = 0; i < 6; ++i) m[i * 6 + i] = 1.0;
    return m;
}

inline bool finite6(const Vec6& z) {
    for (double c : z)
        if (!std::isfinite(c)) return false;
    return true;
}

}  // namespace vpc
