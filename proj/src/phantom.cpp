#include "civs/phantom.hpp"

#include <cmath>
#include <vector>

#include "civs/rng.hpp"

namespace civs {

namespace {

struct Shape {
    bool ellipse = true;
    double cr = 0, cc = 0;    // center
    double ar = 1, ac = 1;    // semi-axes / half-widths
    double angle = 0;         // ellipse rotation
    double intensity = 1;
    double spec_center = 0;   // spectral curve parameters
    double spec_width = 1;
};

double spectral_weight(const Shape& sh, int slice) {
    const double d = (slice - sh.spec_center) / sh.spec_width;
    return 0.25 + 0.75 * std::exp(-0.5 * d * d);
}

bool inside(const Shape& sh, double r, double c) {
    const double dr = r - sh.cr, dc = c - sh.cc;
    if (sh.ellipse) {
        const double cs = std::cos(sh.angle), sn = std::sin(sh.angle);
        const double u = (cs * dr + sn * dc) / sh.ar;
        const double v = (-sn * dr + cs * dc) / sh.ac;
        return u * u + v * v <= 1.0;
    }
    return std::abs(dr) <= sh.ar && std::abs(dc) <= sh.ac;
}

}  // namespace

RealStack make_phantom(int n, int s, uint64_t seed, int shapes) {
    if (n < 4) throw DimensionError("make_phantom: n must be at least 4");
    if (s < 1) throw DimensionError("make_phantom: s must be at least 1");
    if (shapes < 0) throw InvalidArgument("make_phantom: shapes must be >= 0");

    Rng rng(seed);

    // Smooth background: a few broad bumps over a dim floor.
    struct Bump {
        double cr, cc, w, a;
    };
    std::vector<Bump> bumps(3);
    for (auto& b : bumps) {
        b.cr = rng.uniform(0.0, n - 1.0);
        b.cc = rng.uniform(0.0, n - 1.0);
        b.w = rng.uniform(0.4 * n, 0.9 * n);
        b.a = rng.uniform(0.05, 0.2);
    }
    Shape background;  // only its spectral curve is used
    background.spec_center = rng.uniform(0.0, s - 1.0);
    background.spec_width = rng.uniform(0.5 * s, 1.5 * s);

    std::vector<Shape> shp(shapes);
    for (auto& sh : shp) {
        sh.ellipse = rng.bernoulli(0.6);
        sh.cr = rng.uniform(0.15 * n, 0.85 * n);
        sh.cc = rng.uniform(0.15 * n, 0.85 * n);
        sh.ar = rng.uniform(0.06 * n, 0.22 * n);
        sh.ac = rng.uniform(0.06 * n, 0.22 * n);
        sh.angle = rng.uniform(0.0, 3.14159265358979323846);
        sh.intensity = rng.uniform(0.3, 1.0);
        sh.spec_center = rng.uniform(0.0, s - 1.0);
        sh.spec_width = rng.uniform(0.25 * s, 1.0 * s);
    }

    RealStack x(n, n, s);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            double bg = 0.1;
            for (const auto& b : bumps) {
                const double dr = r - b.cr, dc = c - b.cc;
                bg += b.a * std::exp(-(dr * dr + dc * dc) / (2.0 * b.w * b.w));
            }
            // Painter's order: the last shape containing the pixel wins.
            int owner = -1;
            for (int j = 0; j < shapes; ++j)
                if (inside(shp[j], r, c)) owner = j;
            for (int sl = 0; sl < s; ++sl) {
                const double v =
                    owner < 0
                        ? bg * spectral_weight(background, sl)
                        : shp[owner].intensity * spectral_weight(shp[owner], sl);
                x.at(r, c, sl) = v;
            }
        }

    const double m = max_abs(x);
    if (m > 0) scale_inplace(x, 1.0 / m);
    return x;
}

}  // namespace civs
