#ifndef BCHAR_GEOMETRY_HPP
#define BCHAR_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <numbers>

namespace bchar {

/// Fixed-size coordinate/velocity vector. An aggregate so that
/// Vec<2>{x, y} works and the dimension stays deducible as an int.
template <int D>
struct Vec {
    double data[D];
    double& operator[](int k) { return data[k]; }
    const double& operator[](int k) const { return data[k]; }
};

template <int D>
inline Vec<D> operator+(const Vec<D>& a, const Vec<D>& b) {
    Vec<D> r;
    for (int k = 0; k < D; ++k) r[k] = a[k] + b[k];
    return r;
}

template <int D>
inline Vec<D> operator-(const Vec<D>& a, const Vec<D>& b) {
    Vec<D> r;
    for (int k = 0; k < D; ++k) r[k] = a[k] - b[k];
    return r;
}

template <int D>
inline Vec<D> operator*(double s, const Vec<D>& a) {
    Vec<D> r;
    for (int k = 0; k < D; ++k) r[k] = s * a[k];
    return r;
}

template <int D>
inline double dot(const Vec<D>& a, const Vec<D>& b) {
    double s = 0;
    for (int k = 0; k < D; ++k) s += a[k] * b[k];
    return s;
}

template <int D>
inline double norm(const Vec<D>& a) {
    return std::sqrt(dot(a, a));
}

template <int D>
inline double distance(const Vec<D>& a, const Vec<D>& b) {
    return norm<D>(a - b);
}

/// Volume of a ball of radius r: pi r^2 in 2D, 4/3 pi r^3 in 3D.
template <int D>
inline double ball_volume(double r) {
    static_assert(D == 2 || D == 3);
    if constexpr (D == 2)
        return std::numbers::pi * r * r;
    else
        return 4.0 / 3.0 * std::numbers::pi * r * r * r;
}

template <int D>
struct Ball {
    Vec<D> center;
    double radius;
};

/// Exact intersection volume of two balls (circular lens area in 2D,
/// spherical lens volume in 3D). Returns 0 for disjoint balls and the
/// volume of the smaller ball when one contains the other.
template <int D>
inline double ball_intersection_volume(const Vec<D>& ca, double ra,
                                       const Vec<D>& cb, double rb) {
    static_assert(D == 2 || D == 3);
    const double d = distance<D>(ca, cb);
    if (d >= ra + rb) return 0.0;
    const double rmin = std::min(ra, rb);
    if (d <= std::abs(ra - rb)) return ball_volume<D>(rmin);
    if constexpr (D == 2) {
        const double a1 = std::acos((d * d + ra * ra - rb * rb) / (2.0 * d * ra));
        const double a2 = std::acos((d * d + rb * rb - ra * ra) / (2.0 * d * rb));
        const double tri = 0.5 * std::sqrt(std::max(0.0,
            (-d + ra + rb) * (d + ra - rb) * (d - ra + rb) * (d + ra + rb)));
        return ra * ra * a1 + rb * rb * a2 - tri;
    } else {
        const double s = ra + rb - d;
        return std::numbers::pi * s * s *
               (d * d + 2.0 * d * (ra + rb) - 3.0 * (ra - rb) * (ra - rb)) /
               (12.0 * d);
    }
}

template <int D>
inline double ball_intersection_volume(const Ball<D>& a, const Ball<D>& b) {
    return ball_intersection_volume<D>(a.center, a.radius, b.center, b.radius);
}

} // namespace bchar

#endif
