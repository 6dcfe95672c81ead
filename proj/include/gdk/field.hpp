#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdk {

// Dense H x W x C grid of doubles, row-major, channel-interleaved.
// C is 1 for depth-like fields and 3 for normal maps.
struct Field {
    int h = 0;
    int w = 0;
    int c = 1;
    std::vector<double> v;

    Field() = default;
    Field(int h_, int w_, int c_ = 1, double fill = 0.0)
        : h(h_), w(w_), c(c_), v(static_cast<size_t>(h_) * w_ * c_, fill) {
        if (h_ <= 0 || w_ <= 0 || c_ <= 0) {
            throw std::invalid_argument("Field: dimensions must be positive");
        }
    }

    size_t size() const { return v.size(); }
    size_t pixels() const { return static_cast<size_t>(h) * w; }

    double& at(int y, int x, int ch = 0) { return v[(static_cast<size_t>(y) * w + x) * c + ch]; }
    double at(int y, int x, int ch = 0) const { return v[(static_cast<size_t>(y) * w + x) * c + ch]; }

    bool same_shape(const Field& o) const { return h == o.h && w == o.w && c == o.c; }
};

inline void require_same_shape(const Field& a, const Field& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                    std::to_string(a.h) + "x" + std::to_string(a.w) + "x" + std::to_string(a.c) +
                                    " vs " +
                                    std::to_string(b.h) + "x" + std::to_string(b.w) + "x" + std::to_string(b.c) + ")");
    }
}

// a*x + b*y, elementwise
inline Field lincomb(double a, const Field& x, double b, const Field& y) {
    require_same_shape(x, y, "lincomb");
    Field out(x.h, x.w, x.c);
    for (size_t i = 0; i < x.size(); ++i) out.v[i] = a * x.v[i] + b * y.v[i];
    return out;
}

inline double max_abs_diff(const Field& a, const Field& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = std::abs(a.v[i] - b.v[i]);
        if (d > m) m = d;
    }
    return m;
}

}  // namespace gdk
