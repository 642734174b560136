#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace heatsdf {

// Computational domain: the open cube (-domain_half, domain_half)^3.
// Input geometry is normalized into [-1,1]^3, leaving a 0.2 margin.
inline constexpr double domain_half = 1.2;
inline constexpr double domain_edge = 2.0 * domain_half;
inline constexpr double domain_volume = domain_edge * domain_edge * domain_edge;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x; y += o.y; z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x; y -= o.y; z -= o.z;
    return *this;
  }
  Vec3& operator*=(double s) {
    x *= s; y *= s; z *= s;
    return *this;
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double norm2(const Vec3& v) { return dot(v, v); }
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }
inline bool finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

inline bool inside_domain(const Vec3& p) {
  return p.x > -domain_half && p.x < domain_half && p.y > -domain_half && p.y < domain_half &&
         p.z > -domain_half && p.z < domain_half;
}

// Error taxonomy shared by all modules; the CLI maps kinds to exit codes.
enum class ErrorKind {
  FileNotFound,
  ParseError,
  TooFewPoints,
  DegenerateCloud,
  ShapeMismatch,
  NonFiniteGradient,
  VersionMismatch,
  CorruptBlob,
  NoOutsideSeed,
  RejectionStall,
  CgNoConvergence,
  EmptyLevelSet,
  SignAmbiguous,
  DegenerateNormal,
  IoError,
  ConfigInvalid,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::DegenerateCloud: return "DegenerateCloud";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptBlob: return "CorruptBlob";
    case ErrorKind::NoOutsideSeed: return "NoOutsideSeed";
    case ErrorKind::RejectionStall: return "RejectionStall";
    case ErrorKind::CgNoConvergence: return "CgNoConvergence";
    case ErrorKind::EmptyLevelSet: return "EmptyLevelSet";
    case ErrorKind::SignAmbiguous: return "SignAmbiguous";
    case ErrorKind::DegenerateNormal: return "DegenerateNormal";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

// FNV-1a, used for checkpoint blob checksums and run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace heatsdf
