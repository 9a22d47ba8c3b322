#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace qc {

enum class Axis { time, freq };

inline const char* axis_name(Axis a) { return a == Axis::time ? "time" : "freq"; }

// Floor division by 2^s for signed indices.
inline std::int64_t shift_down(std::int64_t j, int s) { return s <= 0 ? j : (j >> s); }

/// Closed-open interval [left, right). Empty when right <= left.
struct RealInterval {
    double left = 0.0;
    double right = 0.0;

    RealInterval() = default;
    RealInterval(double l, double r) : left(l), right(r) {}

    static RealInterval empty_set() { return {0.0, 0.0}; }

    bool empty() const { return !(right > left); }
    double length() const { return empty() ? 0.0 : right - left; }
    double center() const { return 0.5 * (left + right); }
    bool contains(double x) const { return x >= left && x < right; }
    bool contains_closed(double x) const { return x >= left && x <= right; }

    friend bool operator==(const RealInterval&, const RealInterval&) = default;
};

inline RealInterval intersect(const RealInterval& a, const RealInterval& b)
{
    if (a.empty() || b.empty())
        return RealInterval::empty_set();
    RealInterval r{std::max(a.left, b.left), std::min(a.right, b.right)};
    return r.empty() ? RealInterval::empty_set() : r;
}

// Distance from x to the closed interval [a.left, a.right].
inline double dist_to(double x, const RealInterval& a)
{
    if (x < a.left) return a.left - x;
    if (x > a.right) return x - a.right;
    return 0.0;
}

/// Finite union of intervals, kept sorted and disjoint.
class IntervalSet {
public:
    IntervalSet() = default;
    explicit IntervalSet(const RealInterval& a) { add(a); }
    explicit IntervalSet(const std::vector<RealInterval>& parts)
    {
        for (const auto& p : parts)
            if (!p.empty())
                parts_.push_back(p);
        normalize();
    }

    void add(const RealInterval& a)
    {
        if (a.empty())
            return;
        parts_.push_back(a);
        normalize();
    }

    const std::vector<RealInterval>& parts() const { return parts_; }
    bool empty() const { return parts_.empty(); }

    double measure() const
    {
        double m = 0.0;
        for (const auto& p : parts_)
            m += p.length();
        return m;
    }

    bool contains(double x) const
    {
        for (const auto& p : parts_)
            if (p.contains(x))
                return true;
        return false;
    }

    IntervalSet intersect(const IntervalSet& o) const
    {
        IntervalSet r;
        for (const auto& a : parts_)
            for (const auto& b : o.parts_)
                if (auto c = qc::intersect(a, b); !c.empty())
                    r.parts_.push_back(c);
        r.normalize();
        return r;
    }

    IntervalSet intersect(const RealInterval& b) const { return intersect(IntervalSet(b)); }

private:
    void normalize()
    {
        std::sort(parts_.begin(), parts_.end(),
                  [](const RealInterval& a, const RealInterval& b) { return a.left < b.left; });
        std::vector<RealInterval> out;
        for (const auto& p : parts_) {
            if (!out.empty() && p.left <= out.back().right)
                out.back().right = std::max(out.back().right, p.right);
            else
                out.push_back(p);
        }
        parts_ = std::move(out);
    }

    std::vector<RealInterval> parts_;
};

/// Dyadic interval [index 2^-scale, (index+1) 2^-scale) on the time or
/// frequency axis. Endpoints are derived from the integer pair on demand.
struct DyadicInterval {
    int scale = 0;
    std::int64_t index = 0;
    Axis axis = Axis::time;

    DyadicInterval() = default;
    DyadicInterval(int k, std::int64_t j, Axis ax = Axis::time) : scale(k), index(j), axis(ax)
    {
        if (axis == Axis::time && scale < 0)
            throw std::invalid_argument("time-axis dyadic interval needs scale >= 0");
    }

    double length() const { return std::ldexp(1.0, -scale); }
    double left() const { return std::ldexp(static_cast<double>(index), -scale); }
    double right() const { return std::ldexp(static_cast<double>(index + 1), -scale); }
    double center() const { return std::ldexp(static_cast<double>(2 * index + 1), -scale - 1); }
    RealInterval real() const { return {left(), right()}; }

    // Time intervals at scale >= 0 must sit inside [0,1).
    bool in_unit() const { return axis != Axis::time || (index >= 0 && index < (std::int64_t{1} << scale)); }

    bool contains(double x) const { return x >= left() && x < right(); }

    // Exact containment of dyadic intervals on the same axis.
    bool subset_of(const DyadicInterval& o) const
    {
        if (axis != o.axis || scale < o.scale)
            return false;
        return shift_down(index, scale - o.scale) == o.index;
    }

    bool disjoint_from(const DyadicInterval& o) const { return !subset_of(o) && !o.subset_of(*this); }

    DyadicInterval parent() const { return {scale - 1, shift_down(index, 1), axis}; }
    DyadicInterval ancestor(int s) const { return {s, shift_down(index, scale - s), axis}; }
    DyadicInterval left_child() const { return {scale + 1, 2 * index, axis}; }
    DyadicInterval right_child() const { return {scale + 1, 2 * index + 1, axis}; }

    friend bool operator==(const DyadicInterval&, const DyadicInterval&) = default;
    friend auto operator<=>(const DyadicInterval& a, const DyadicInterval& b)
    {
        if (auto c = a.axis <=> b.axis; c != 0) return c;
        if (auto c = a.scale <=> b.scale; c != 0) return c;
        return a.index <=> b.index;
    }
};

inline double center(const DyadicInterval& I) { return I.center(); }

struct BrotherResult {
    DyadicInterval interval;
    bool escapes_unit = false;  // time-axis result outside [0,1)
};

inline BrotherResult right_brother(const DyadicInterval& I)
{
    DyadicInterval r{I.scale, I.index + 1, I.axis};
    return {r, !r.in_unit()};
}

inline BrotherResult left_brother(const DyadicInterval& I)
{
    DyadicInterval r{I.scale, I.index - 1, I.axis};
    return {r, !r.in_unit()};
}

inline RealInterval dilate(const RealInterval& I, double a)
{
    if (!(a > 0))
        throw std::invalid_argument("dilation factor must be positive");
    const double c = I.center(), h = 0.5 * a * (I.right - I.left);
    return {c - h, c + h};
}

inline RealInterval dilate(const DyadicInterval& I, double a) { return dilate(I.real(), a); }

struct StarIntervals {
    RealInterval right;
    RealInterval left;
    IntervalSet both() const
    {
        IntervalSet s(right);
        s.add(left);
        return s;
    }
};

inline StarIntervals star_intervals(const DyadicInterval& I)
{
    const double c = I.center(), L = I.length();
    return {{c + 3.5 * L, c + 5.5 * L}, {c - 5.5 * L, c - 3.5 * L}};
}

inline RealInterval tilde(const DyadicInterval& I) { return dilate(I, 13.0); }

// Reduce a union of intervals modulo 1 onto [0,1).
inline IntervalSet wrap_unit(const IntervalSet& s)
{
    IntervalSet out;
    for (const auto& p : s.parts()) {
        if (p.length() >= 1.0) {
            out.add({0.0, 1.0});
            continue;
        }
        const double shift = std::floor(p.left);
        const double l = p.left - shift, r = p.right - shift;
        if (r <= 1.0) {
            out.add({l, r});
        } else {
            out.add({l, 1.0});
            out.add({0.0, r - 1.0});
        }
    }
    return out;
}

/// All 2^k time intervals of scale k, left to right.
inline std::vector<DyadicInterval> scale_partition(int k)
{
    std::vector<DyadicInterval> v;
    v.reserve(std::size_t{1} << k);
    for (std::int64_t j = 0; j < (std::int64_t{1} << k); ++j)
        v.emplace_back(k, j, Axis::time);
    return v;
}

}  // namespace qc
