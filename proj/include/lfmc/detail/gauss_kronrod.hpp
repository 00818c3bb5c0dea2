#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <vector>

namespace lfmc::detail {

// 15-point Kronrod extension of the 7-point Gauss-Legendre rule on [-1, 1].
// Nodes are listed for x >= 0; index 7 is the centre.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct VectorQuadrature {
    std::vector<double> integral;
    double error = 0.0;  // sum over intervals of the max-component error
    int intervals = 0;
    bool converged = false;
};

/// Globally adaptive G7-K15 quadrature of a vector-valued integrand.
///
/// `f(z, out)` writes `dim` values into `out`. `edges` are sorted interval
/// boundaries (at least two); every initial sub-interval is integrated and
/// the one with the largest error is bisected until the summed error falls
/// below `abs_tol` or `max_intervals` is reached.
template <class F>
VectorQuadrature integrate_gk15(F&& f, std::span<const double> edges, std::size_t dim, double abs_tol,
                                int max_intervals = 4000) {
    struct Piece {
        double a, b, err;
        std::vector<double> value;
    };
    auto cmp = [](const Piece& x, const Piece& y) { return x.err < y.err; };
    std::priority_queue<Piece, std::vector<Piece>, decltype(cmp)> heap(cmp);

    std::vector<double> fc(dim), f1(dim), f2(dim), kron(dim), gauss(dim);
    auto rule = [&](double a, double b) {
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        f(mid, fc.data());
        for (std::size_t c = 0; c < dim; ++c) {
            kron[c] = kKronrodWeights[7] * fc[c];
            gauss[c] = kGaussWeights[3] * fc[c];
        }
        for (std::size_t k = 0; k < 7; ++k) {
            const double dx = half * kKronrodNodes[k];
            f(mid - dx, f1.data());
            f(mid + dx, f2.data());
            for (std::size_t c = 0; c < dim; ++c) {
                const double s = f1[c] + f2[c];
                kron[c] += kKronrodWeights[k] * s;
                if (k % 2 == 1) gauss[c] += kGaussWeights[k / 2] * s;
            }
        }
        Piece p{a, b, 0.0, std::vector<double>(dim)};
        for (std::size_t c = 0; c < dim; ++c) {
            p.value[c] = kron[c] * half;
            p.err = std::max(p.err, std::abs((kron[c] - gauss[c]) * half));
        }
        return p;
    };

    VectorQuadrature out;
    out.integral.assign(dim, 0.0);
    double total_err = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (!(edges[i + 1] > edges[i])) continue;
        Piece p = rule(edges[i], edges[i + 1]);
        total_err += p.err;
        heap.push(std::move(p));
    }

    while (total_err > abs_tol && static_cast<int>(heap.size()) < max_intervals) {
        Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {  // interval at machine resolution
            heap.push(std::move(worst));
            break;
        }
        Piece left = rule(worst.a, mid);
        Piece right = rule(mid, worst.b);
        total_err += left.err + right.err - worst.err;
        heap.push(std::move(left));
        heap.push(std::move(right));
    }

    out.intervals = static_cast<int>(heap.size());
    out.converged = total_err <= abs_tol;
    out.error = 0.0;
    while (!heap.empty()) {
        const Piece& p = heap.top();
        for (std::size_t c = 0; c < dim; ++c) out.integral[c] += p.value[c];
        out.error += p.err;
        heap.pop();
    }
    return out;
}

}  // namespace lfmc::detail
