#pragma once

// x-only 3- and 4-isogenies and the strategy-driven chain evaluator. The
// 2-isogenies used by the countermeasure plug into the same evaluator from
// countermeasure.hpp.
//
// The chain evaluator walks a strategy tree: it multiplies the kernel
// generator down to order ell (ell = 3 or 4), builds the small isogeny from
// it, and pushes every stored intermediate point through. An optional
// FaultHook zeroes the imaginary parts of one isogeny's output coefficient,
// which is how the fault oracle models the attacker's injection.

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "montgomery.hpp"

namespace sidhfault {

template <std::size_t N, unsigned Degree>
struct IsogenyStep {
    static_assert(Degree >= 2 && Degree <= 4);
    static constexpr unsigned degree = Degree;

    ProjCoeff<N> codomain;
    std::array<Fp2<N>, Degree == 4 ? 3 : 2> eval_data;
};

template <std::size_t N>
using Isogeny3 = IsogenyStep<N, 3>;
template <std::size_t N>
using Isogeny4 = IsogenyStep<N, 4>;

// K of exact order 3. Output codomain is (A' + 2C' : A' - 2C').
template <std::size_t N>
Isogeny3<N> xisog3(XPoint<N> const &K)
{
    Fp2<N> k0 = K.X - K.Z;
    Fp2<N> t0 = k0.sqr();
    Fp2<N> k1 = K.X + K.Z;
    Fp2<N> t1 = k1.sqr();
    Fp2<N> t3 = (k0 + k1).sqr() - t0 - t1;
    Fp2<N> t2 = t1 + t3;
    t3 = t3 + t0;
    Fp2<N> t4 = (t3 + t0).dbl() + t1;
    Fp2<N> a24minus = t2 * t4;
    t4 = (t1 + t2).dbl() + t0;
    Fp2<N> a24plus = t3 * t4;
    return {{a24plus, a24minus}, {k0, k1}};
}

template <std::size_t N>
XPoint<N> xeval3(XPoint<N> const &Q, Isogeny3<N> const &phi)
{
    Fp2<N> t0 = (Q.X + Q.Z) * phi.eval_data[0];
    Fp2<N> t1 = (Q.X - Q.Z) * phi.eval_data[1];
    Fp2<N> t2 = (t0 + t1).sqr();
    t0 = (t1 - t0).sqr();
    return {Q.X * t2, Q.Z * t0};
}

// K of exact order 4 with [2]K != (0, 0).
template <std::size_t N>
Isogeny4<N> xisog4(XPoint<N> const &K)
{
    Fp2<N> k1 = K.X - K.Z;
    Fp2<N> k2 = K.X + K.Z;
    Fp2<N> k0 = K.Z.sqr().dbl();
    Fp2<N> c24 = k0.sqr();
    k0 = k0.dbl();
    Fp2<N> a24plus = K.X.sqr().dbl().sqr();
    return {{a24plus, a24plus - c24}, {k0, k1, k2}};
}

template <std::size_t N>
XPoint<N> xeval4(XPoint<N> const &Q, Isogeny4<N> const &phi)
{
    Fp2<N> t0 = Q.X + Q.Z;
    Fp2<N> t1 = Q.X - Q.Z;
    Fp2<N> x = t0 * phi.eval_data[1];
    Fp2<N> z = t1 * phi.eval_data[2];
    t0 = t0 * t1 * phi.eval_data[0];
    t1 = (x + z).sqr();
    z = (x - z).sqr();
    x = (t0 + t1) * t1;
    z = z * (z - t0);
    return {x, z};
}

// ---------------------------------------------------------------------------
// Strategies.

// A tree-walk schedule for a chain of n isogenies: n - 1 positive integers,
// each the number of multiply-by-ell steps taken before storing a point.
struct Strategy {
    std::vector<std::size_t> steps;

    std::size_t chain_length() const { return steps.size() + 1; }
    friend bool operator==(Strategy const &, Strategy const &) = default;
};

// Replays the index bookkeeping of the chain evaluator without any
// arithmetic. A strategy is valid iff every entry is positive, every row ends
// exactly on its leaf, and all entries are consumed.
inline bool is_valid_strategy(Strategy const &s, std::size_t n)
{
    if (n == 0 || s.steps.size() + 1 != n)
        return false;
    std::vector<std::size_t> stack;
    std::size_t index = 0;
    std::size_t k = 0;
    for (std::size_t row = 1; row <= n; ++row) {
        while (index < n - row) {
            if (k >= s.steps.size() || s.steps[k] == 0)
                return false;
            stack.push_back(index);
            index += s.steps[k++];
        }
        if (index != n - row)
            return false;
        if (row < n) {
            if (stack.empty())
                return false;
            index = stack.back();
            stack.pop_back();
        }
    }
    return k == s.steps.size() && stack.empty();
}

// Optimal strategy for n isogenies under the usual cost recursion
//   C(1) = 0,  C(n) = min_b C(n - b) + C(b) + b * cost_mul + (n - b) * cost_eval
// where cost_mul prices one multiply-by-ell and cost_eval one point pushed
// through one isogeny.
inline Strategy balanced_strategy(std::size_t n, double cost_mul, double cost_eval)
{
    if (n == 0)
        throw ContractViolation("strategy for an empty chain");
    std::vector<double> cost(n + 1, 0.0);
    std::vector<std::size_t> split(n + 1, 0);
    for (std::size_t i = 2; i <= n; ++i) {
        cost[i] = std::numeric_limits<double>::infinity();
        for (std::size_t b = 1; b < i; ++b) {
            double c = cost[i - b] + cost[b] + static_cast<double>(b) * cost_mul +
                       static_cast<double>(i - b) * cost_eval;
            if (c < cost[i]) {
                cost[i] = c;
                split[i] = b;
            }
        }
    }
    Strategy s;
    // Emit S(n) = [b] ++ S(n - b) ++ S(b), iteratively to avoid deep recursion.
    std::vector<std::size_t> todo{n};
    while (!todo.empty()) {
        std::size_t m = todo.back();
        todo.pop_back();
        if (m <= 1)
            continue;
        std::size_t b = split[m];
        s.steps.push_back(b);
        todo.push_back(b);
        todo.push_back(m - b);
    }
    return s;
}

// Relative costs in GF(p^2) multiplications, matching the formulas above.
inline Strategy default_strategy3(std::size_t n) { return balanced_strategy(n, 13.0, 6.0); }
inline Strategy default_strategy4(std::size_t n) { return balanced_strategy(n, 16.0, 9.0); }

// ---------------------------------------------------------------------------
// Chain evaluation.

// Zeroes the imaginary parts of the codomain coefficient produced by the
// isogeny with 0-based index target_index, once.
struct FaultHook {
    std::size_t target_index = 0;
    bool armed = true;
};

template <std::size_t N>
ProjCoeff<N> zero_imaginary_parts(ProjCoeff<N> const &c)
{
    auto const &f = c.alpha.field();
    return {Fp2<N>(c.alpha.re(), Fp2<N>::Base::zero(f)), Fp2<N>(c.beta.re(), Fp2<N>::Base::zero(f))};
}

// Coefficients E_0 .. E_n of a chain run. A faulted entry holds the value
// after the fault; the value it replaced is kept in prefault_coeff.
template <std::size_t N>
struct ChainTrace {
    std::vector<ProjCoeff<N>> coeffs;
    std::vector<XPoint<N>> kernels;
    std::optional<std::size_t> faulted_step;
    std::optional<ProjCoeff<N>> prefault_coeff;
    std::optional<std::size_t> failed_step;

    // One line per curve: index, alpha, beta, affine A, coeff_in_fp flag.
    std::string dump() const
    {
        std::ostringstream os;
        os << "# index alpha beta A in_fp\n";
        if (faulted_step)
            os << "# fault after isogeny " << *faulted_step << "\n";
        if (failed_step)
            os << "# kernel order check failed at isogeny " << *failed_step << "\n";
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            auto const &c = coeffs[i];
            os << i << ' ' << c.alpha.to_string() << ' ' << c.beta.to_string() << ' ';
            if (c.alpha == c.beta)
                os << "degenerate -";
            else
                os << affine_a_from_projective(c).to_string() << ' ' << (coeff_in_fp(c) ? 1 : 0);
            os << '\n';
        }
        return os.str();
    }
};

enum class ChainStatus {
    completed,
    // A kernel point failed its order check; the run stopped there.
    degenerate,
};

template <std::size_t N>
struct ChainResult {
    ChainStatus status = ChainStatus::completed;
    ProjCoeff<N> coeff;
    std::vector<XPoint<N>> pushed;
    ChainTrace<N> trace;

    bool ok() const { return status == ChainStatus::completed; }
};

namespace detail {

template <unsigned Degree>
struct ChainOps;

template <>
struct ChainOps<3> {
    template <std::size_t N>
    static XPoint<N> mul(XPoint<N> const &P, ProjCoeff<N> const &c, std::size_t m)
    {
        return xtpl_e(P, c, m);
    }
    template <std::size_t N>
    static bool kernel_ok(XPoint<N> const &K, ProjCoeff<N> const &c)
    {
        return has_exact_order(K, c, 3, 1);
    }
    template <std::size_t N>
    static Isogeny3<N> isog(XPoint<N> const &K)
    {
        return xisog3(K);
    }
    template <std::size_t N>
    static XPoint<N> eval(XPoint<N> const &Q, Isogeny3<N> const &phi)
    {
        return xeval3(Q, phi);
    }
};

template <>
struct ChainOps<4> {
    template <std::size_t N>
    static XPoint<N> mul(XPoint<N> const &P, ProjCoeff<N> const &c, std::size_t m)
    {
        return xdbl_e(P, c, 2 * m);
    }
    template <std::size_t N>
    static bool kernel_ok(XPoint<N> const &K, ProjCoeff<N> const &c)
    {
        return has_exact_order(K, c, 2, 2);
    }
    template <std::size_t N>
    static Isogeny4<N> isog(XPoint<N> const &K)
    {
        return xisog4(K);
    }
    template <std::size_t N>
    static XPoint<N> eval(XPoint<N> const &Q, Isogeny4<N> const &phi)
    {
        return xeval4(Q, phi);
    }
};

} // namespace detail

// Computes the ell^n-isogeny with kernel <R> (ell^n = 3^n or 4^n, n =
// strategy.chain_length()) as n small isogenies, pushing push_points through.
// Every kernel point is order-checked before use; a failure stops the run with
// status degenerate and the failing isogeny index in trace.failed_step.
template <unsigned Degree, std::size_t N>
ChainResult<N> evaluate_chain(XPoint<N> const &R, ProjCoeff<N> const &coeff, Strategy const &strategy,
                              std::vector<XPoint<N>> push_points = {},
                              std::optional<FaultHook> hook = std::nullopt)
{
    using Ops = detail::ChainOps<Degree>;
    std::size_t const n = strategy.chain_length();
    if (!is_valid_strategy(strategy, n))
        throw ContractViolation("invalid strategy");

    ChainResult<N> out;
    out.coeff = coeff;
    out.trace.coeffs.push_back(coeff);
    out.trace.coeffs.reserve(n + 1);

    std::vector<std::pair<XPoint<N>, std::size_t>> stack;
    XPoint<N> kernel = R;
    std::size_t index = 0;
    std::size_t k = 0;
    bool fired = false;

    for (std::size_t row = 1; row <= n; ++row) {
        while (index < n - row) {
            stack.emplace_back(kernel, index);
            std::size_t m = strategy.steps[k++];
            kernel = Ops::mul(kernel, out.coeff, m);
            index += m;
        }
        if (!Ops::kernel_ok(kernel, out.coeff)) {
            out.status = ChainStatus::degenerate;
            out.trace.failed_step = row - 1;
            return out;
        }
        auto phi = Ops::isog(kernel);
        out.coeff = phi.codomain;
        if (hook && hook->armed && !fired && hook->target_index == row - 1) {
            out.trace.prefault_coeff = out.coeff;
            out.trace.faulted_step = row - 1;
            out.coeff = zero_imaginary_parts(out.coeff);
            fired = true;
        }
        out.trace.coeffs.push_back(out.coeff);
        out.trace.kernels.push_back(kernel);
        for (auto &entry : stack)
            entry.first = Ops::eval(entry.first, phi);
        for (auto &P : push_points)
            P = Ops::eval(P, phi);
        if (row < n) {
            kernel = stack.back().first;
            index = stack.back().second;
            stack.pop_back();
        }
    }
    out.pushed = std::move(push_points);
    return out;
}

// The 3^n-isogeny of Bob's side. Strategy length fixes n.
template <std::size_t N>
ChainResult<N> strategy_eval3(XPoint<N> const &R, ProjCoeff<N> const &coeff, Strategy const &strategy,
                              std::vector<XPoint<N>> push_points = {},
                              std::optional<FaultHook> hook = std::nullopt)
{
    return evaluate_chain<3>(R, coeff, strategy, std::move(push_points), hook);
}

// The 4^n-isogeny of Alice's side.
template <std::size_t N>
ChainResult<N> strategy_eval4(XPoint<N> const &R, ProjCoeff<N> const &coeff, Strategy const &strategy,
                              std::vector<XPoint<N>> push_points = {})
{
    return evaluate_chain<4>(R, coeff, strategy, std::move(push_points));
}

} // namespace sidhfault
