#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aeromap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// The input is geometrically degenerate for the requested estimate.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable dataset / ground-truth / map file.
class DatasetError : public Error {
public:
    using Error::Error;
};

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace aeromap
