#pragma once

// SIDH key generation and shared-secret derivation for both sides, public
// parameter sets and their text format.
//
// Alice works with 2^e2-torsion (e2 even, 4-isogenies only), Bob with
// 3^e3-torsion. Public keys are affine x-coordinates (x(P'), x(Q'), x(P'-Q')).
// Nothing on the victim path looks at whether a coefficient lies in GF(p).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "isogeny.hpp"

namespace sidhfault {

enum class Side { alice, bob };

inline char const *side_name(Side s) { return s == Side::alice ? "alice" : "bob"; }

inline Side parse_side(std::string const &s)
{
    if (s == "alice")
        return Side::alice;
    if (s == "bob")
        return Side::bob;
    throw ParseError("side must be 'alice' or 'bob', got '" + s + "'");
}

template <std::size_t N>
struct SidhParams {
    static constexpr std::size_t limbs = N;

    std::string name;
    std::shared_ptr<PrimeField<N> const> field_ptr;
    Fp2<N> A;  // starting curve, 6 for every shipped set
    Fp2<N> xPA, xQA, xRA;  // R = P - Q
    Fp2<N> xPB, xQB, xRB;
    Strategy strategy_alice;
    Strategy strategy_bob;

    PrimeField<N> const &field() const { return *field_ptr; }
    unsigned e2() const { return field_ptr->e2(); }
    unsigned e3() const { return field_ptr->e3(); }
    MontgomeryCurve<N> curve() const { return {A}; }
    ProjCoeff<N> coeff() const { return ProjCoeff<N>::from_affine(A); }

    UInt<N> order2() const { return small_pow<N>(2, e2()); }
    UInt<N> order3() const { return small_pow<N>(3, e3()); }

    // Largest private key the range [1, ell^(e-1) - 1] allows.
    UInt<N> key_bound(Side s) const
    {
        return (s == Side::alice ? small_pow<N>(2, e2() - 1) : small_pow<N>(3, e3() - 1)) - UInt<N>{1};
    }
    // Scalars accepted by keygen/derive: [0, ell^e).
    UInt<N> scalar_bound(Side s) const { return s == Side::alice ? order2() : order3(); }
};

template <std::size_t N>
struct PrivateKey {
    Side side = Side::bob;
    UInt<N> sk;

    // Radix-3 digit s_i of a Bob key.
    unsigned trit(std::size_t i) const
    {
        UInt<N> t = sk;
        for (std::size_t k = 0; k < i; ++k)
            t.divmod_small(3);
        return static_cast<unsigned>(t.divmod_small(3));
    }
};

template <std::size_t N>
struct PublicKey {
    Fp2<N> xP, xQ, xPQ;

    friend bool operator==(PublicKey const &a, PublicKey const &b)
    {
        return a.xP == b.xP && a.xQ == b.xQ && a.xPQ == b.xPQ;
    }
};

template <std::size_t N, class Rng>
PrivateKey<N> random_private_key(SidhParams<N> const &params, Side side, Rng &rng)
{
    UInt<N> hi = params.key_bound(side);
    return {side, random_below(hi, rng) + UInt<N>{1}};
}

template <std::size_t N>
void check_scalar(SidhParams<N> const &params, PrivateKey<N> const &key)
{
    if (!(key.sk < params.scalar_bound(key.side)))
        throw ContractViolation(std::string(side_name(key.side)) + " private key out of range");
}

// Montgomery A of the curve carrying x(P), x(Q), x(P - Q):
//   A = (1 - xP xQ - xP xR - xQ xR)^2 / (4 xP xQ xR) - xP - xQ - xR
template <std::size_t N>
Fp2<N> get_a(PublicKey<N> const &pk)
{
    auto const &f = pk.xP.field();
    Fp2<N> one = Fp2<N>::one(f);
    Fp2<N> den = (pk.xP * pk.xQ * pk.xPQ).dbl().dbl();
    if (den.is_zero())
        throw InconsistentPublicKey("public key has a zero x-coordinate");
    Fp2<N> num = (one - pk.xP * pk.xQ - pk.xP * pk.xPQ - pk.xQ * pk.xPQ).sqr();
    Fp2<N> A = num * den.inv() - pk.xP - pk.xQ - pk.xPQ;
    if (A.sqr() == Fp2<N>(f, 4))
        throw InconsistentPublicKey("public key describes a singular curve");
    return A;
}

template <std::size_t N>
PublicKey<N> affine_triple(XPoint<N> const &P, XPoint<N> const &Q, XPoint<N> const &PQ)
{
    if (P.Z.is_zero() || Q.Z.is_zero() || PQ.Z.is_zero())
        throw DegenerateCoefficient("pushed basis point reached infinity");
    Fp2<N> zz = P.Z * Q.Z;
    Fp2<N> inv = (zz * PQ.Z).inv();
    Fp2<N> invPQ = zz * inv;       // 1 / PQ.Z
    Fp2<N> invPQQ = PQ.Z * inv;    // 1 / (P.Z Q.Z)
    return {P.X * Q.Z * invPQQ, Q.X * P.Z * invPQQ, PQ.X * invPQ};
}

template <std::size_t N>
PublicKey<N> keygen(SidhParams<N> const &params, PrivateKey<N> const &key)
{
    check_scalar(params, key);
    auto c = params.coeff();
    auto xp = [](Fp2<N> const &x) { return XPoint<N>::from_affine(x); };
    if (key.side == Side::alice) {
        auto R = ladder3pt(key.sk, xp(params.xPA), xp(params.xQA), xp(params.xRA), c);
        auto res = strategy_eval4(R, c, params.strategy_alice, {xp(params.xPB), xp(params.xQB), xp(params.xRB)});
        if (!res.ok())
            throw InvalidParameters("Alice kernel failed its order check");
        return affine_triple(res.pushed[0], res.pushed[1], res.pushed[2]);
    }
    auto R = ladder3pt(key.sk, xp(params.xPB), xp(params.xQB), xp(params.xRB), c);
    auto res = strategy_eval3(R, c, params.strategy_bob, {xp(params.xPA), xp(params.xQA), xp(params.xRA)});
    if (!res.ok())
        throw InvalidParameters("Bob kernel failed its order check");
    return affine_triple(res.pushed[0], res.pushed[1], res.pushed[2]);
}

// The secret isogeny chain of derive, exposed for the fault oracle and the
// countermeasure. Throws InconsistentPublicKey when no curve fits pk.
template <std::size_t N>
ChainResult<N> derive_chain(SidhParams<N> const &params, PrivateKey<N> const &key, PublicKey<N> const &pk,
                            std::optional<FaultHook> hook = std::nullopt)
{
    check_scalar(params, key);
    auto c = ProjCoeff<N>::from_affine(get_a(pk));
    auto xp = [](Fp2<N> const &x) { return XPoint<N>::from_affine(x); };
    auto R = ladder3pt(key.sk, xp(pk.xP), xp(pk.xQ), xp(pk.xPQ), c);
    if (key.side == Side::alice)
        return strategy_eval4(R, c, params.strategy_alice);
    return strategy_eval3(R, c, params.strategy_bob, {}, hook);
}

// Shared j-invariant; nullopt when the chain degenerates on a malformed key.
template <std::size_t N>
std::optional<Fp2<N>> derive(SidhParams<N> const &params, PrivateKey<N> const &key, PublicKey<N> const &pk)
{
    ChainResult<N> res;
    try {
        res = derive_chain(params, key, pk);
    } catch (InconsistentPublicKey const &) {
        return std::nullopt;
    }
    if (!res.ok() || res.coeff.alpha == res.coeff.beta)
        return std::nullopt;
    return j_invariant(res.coeff);
}

// ---------------------------------------------------------------------------
// Parameter generation.

namespace detail {

template <std::size_t N>
bool is_two_torsion_origin(XPoint<N> const &T)
{
    return T.X.is_zero() && !T.Z.is_zero();
}

// Point with x in GF(p) on E (rational) or on its GF(p) twist (y in i*GF(p)),
// cofactor-cleared to exact order 3^e3.
template <std::size_t N, class Rng>
std::optional<FullPoint<N>> fp_point_of_order3(MontgomeryCurve<N> const &E, bool twist, Rng &rng)
{
    auto const &f = E.field();
    auto c = E.coeff();
    Fp2<N> x(Fp<N>::random(f, rng));
    Fp<N> r = E.rhs(x).re();
    if (r.is_zero() || r.is_square() == twist)
        return std::nullopt;
    XPoint<N> P = clear_cofactor(XPoint<N>::from_affine(x), c, 3, f.e3());
    if (!has_exact_order(P, c, 3, f.e3()))
        return std::nullopt;
    return lift_xpoint(E, P);
}

} // namespace detail

template <std::size_t N, class Rng>
SidhParams<N> param_gen(unsigned e2, unsigned e3, Rng &rng, std::string name = {},
                        int attempts = default_sampling_attempts)
{
    if (e2 % 2 != 0)
        throw InvalidParameters("e2 must be even");
    SidhParams<N> out;
    out.field_ptr = PrimeField<N>::create(e2, e3);
    auto const &f = out.field();
    out.name = name.empty() ? "p" + std::to_string(e2) + "_" + std::to_string(e3) : std::move(name);
    out.A = Fp2<N>(f, 6);
    auto E = out.curve();
    auto c = out.coeff();

    // Bob: P_B on E(GF(p)), Q_B on the twist part, so both x lie in GF(p) and
    // x(P_B - Q_B) does not.
    bool bob_done = false;
    for (int k = 0; k < attempts && !bob_done; ++k) {
        auto P = detail::fp_point_of_order3(E, false, rng);
        auto Q = detail::fp_point_of_order3(E, true, rng);
        if (!P || !Q)
            continue;
        auto p3 = xtpl_e(P->xpoint(), c, e3 - 1), q3 = xtpl_e(Q->xpoint(), c, e3 - 1);
        if (same_x(p3, q3))
            continue;
        auto D = sub(E, *P, *Q);
        if (D.infinity || D.x.in_base_field())
            continue;
        out.xPB = P->x;
        out.xQB = Q->x;
        out.xRB = D.x;
        bob_done = true;
    }
    if (!bob_done)
        throw SamplingExhausted("no Bob basis found");

    // Alice: [2^(e2-1)] Q_A = (0, 0) and [2^(e2-1)] P_A != (0, 0), so a
    // kernel P_A + [sk] Q_A never lies above (0, 0).
    std::optional<FullPoint<N>> PA, QA;
    for (int k = 0; k < attempts && !(PA && QA); ++k) {
        auto T = sample_point_of_order(E, 2, e2, rng, attempts);
        bool over_origin = detail::is_two_torsion_origin(xdbl_e(T.xpoint(), c, e2 - 1));
        if (over_origin && !QA)
            QA = T;
        else if (!over_origin && !PA)
            PA = T;
    }
    if (!PA || !QA)
        throw SamplingExhausted("no Alice basis found");
    auto DA = sub(E, *PA, *QA);
    out.xPA = PA->x;
    out.xQA = QA->x;
    out.xRA = DA.x;

    out.strategy_alice = default_strategy4(e2 / 2);
    out.strategy_bob = default_strategy3(e3);
    return out;
}

// Checks the invariants a loaded or generated parameter set must satisfy.
template <std::size_t N>
void validate_params(SidhParams<N> const &params)
{
    auto c = params.coeff();
    auto xp = [](Fp2<N> const &x) { return XPoint<N>::from_affine(x); };
    unsigned e2 = params.e2(), e3 = params.e3();
    if (e2 % 2 != 0)
        throw InvalidParameters("e2 must be even");
    if (!has_exact_order(xp(params.xPA), c, 2, e2) || !has_exact_order(xp(params.xQA), c, 2, e2) ||
        !has_exact_order(xp(params.xRA), c, 2, e2))
        throw InvalidParameters("Alice basis does not have order 2^e2");
    if (!has_exact_order(xp(params.xPB), c, 3, e3) || !has_exact_order(xp(params.xQB), c, 3, e3) ||
        !has_exact_order(xp(params.xRB), c, 3, e3))
        throw InvalidParameters("Bob basis does not have order 3^e3");
    auto pa = xdbl_e(xp(params.xPA), c, e2 - 1), qa = xdbl_e(xp(params.xQA), c, e2 - 1);
    if (same_x(pa, qa) || detail::is_two_torsion_origin(pa) || !detail::is_two_torsion_origin(qa))
        throw InvalidParameters("Alice basis is dependent or does not put Q_A above (0, 0)");
    if (same_x(xtpl_e(xp(params.xPB), c, e3 - 1), xtpl_e(xp(params.xQB), c, e3 - 1)))
        throw InvalidParameters("Bob basis is dependent");
    if (!params.xPB.in_base_field() || !params.xQB.in_base_field() || params.xRB.in_base_field())
        throw InvalidParameters("Bob basis must have x(P_B), x(Q_B) in GF(p) and x(P_B - Q_B) outside");
    if (!(get_a(PublicKey<N>{params.xPA, params.xQA, params.xRA}) == params.A) ||
        !(get_a(PublicKey<N>{params.xPB, params.xQB, params.xRB}) == params.A))
        throw InvalidParameters("basis differences do not match the starting curve");
}

// ---------------------------------------------------------------------------
// Text formats: key=value lines, '#' comments, GF(p^2) values as "re,im" hex.

inline std::map<std::string, std::string> parse_key_values(std::string const &text)
{
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key=value, got '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

inline std::string const &require_key(std::map<std::string, std::string> const &kv, std::string const &key)
{
    auto it = kv.find(key);
    if (it == kv.end())
        throw ParseError("missing key '" + key + "'");
    return it->second;
}

inline unsigned parse_unsigned(std::string const &s)
{
    std::size_t used = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(s, &used);
    } catch (std::exception const &) {
        throw ParseError("expected an integer, got '" + s + "'");
    }
    if (used != s.size() || v > 100000)
        throw ParseError("expected a small integer, got '" + s + "'");
    return static_cast<unsigned>(v);
}

inline std::string read_text_file(std::string const &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// (e2, e3) of a parameter file, for choosing the limb count before parsing.
inline std::pair<unsigned, unsigned> peek_exponents(std::string const &text)
{
    auto kv = parse_key_values(text);
    return {parse_unsigned(require_key(kv, "e2")), parse_unsigned(require_key(kv, "e3"))};
}

template <std::size_t N>
std::string params_to_text(SidhParams<N> const &params)
{
    std::ostringstream os;
    os << "name=" << params.name << '\n'
       << "e2=" << params.e2() << '\n'
       << "e3=" << params.e3() << '\n'
       << "p=" << params.field().modulus().to_hex(params.field().byte_size()) << '\n'
       << "A=" << params.A.to_string() << '\n'
       << "xPA=" << params.xPA.to_string() << '\n'
       << "xQA=" << params.xQA.to_string() << '\n'
       << "xRA=" << params.xRA.to_string() << '\n'
       << "xPB=" << params.xPB.to_string() << '\n'
       << "xQB=" << params.xQB.to_string() << '\n'
       << "xRB=" << params.xRB.to_string() << '\n';
    return os.str();
}

template <std::size_t N>
SidhParams<N> params_from_text(std::string const &text)
{
    auto kv = parse_key_values(text);
    SidhParams<N> out;
    out.name = require_key(kv, "name");
    unsigned e2 = parse_unsigned(require_key(kv, "e2"));
    unsigned e3 = parse_unsigned(require_key(kv, "e3"));
    out.field_ptr = PrimeField<N>::create(e2, e3);
    auto const &f = out.field();
    auto p = UInt<N>::from_hex(require_key(kv, "p"));
    if (!p || !(*p == f.modulus()))
        throw InvalidParameters("p does not equal 2^e2 * 3^e3 - 1");
    auto get = [&](char const *key) { return Fp2<N>::parse(f, require_key(kv, key)); };
    out.A = get("A");
    out.xPA = get("xPA");
    out.xQA = get("xQA");
    out.xRA = get("xRA");
    out.xPB = get("xPB");
    out.xQB = get("xQB");
    out.xRB = get("xRB");
    out.strategy_alice = default_strategy4(e2 / 2);
    out.strategy_bob = default_strategy3(e3);
    validate_params(out);
    return out;
}

// Key files name the parameter set and its prime so keys from another set
// are rejected.
template <std::size_t N>
std::string key_header(SidhParams<N> const &params)
{
    return "params=" + params.name + "\np=" + params.field().modulus().to_hex(params.field().byte_size()) + "\n";
}

template <std::size_t N>
void check_key_header(SidhParams<N> const &params, std::map<std::string, std::string> const &kv)
{
    auto p = UInt<N>::from_hex(require_key(kv, "p"));
    if (require_key(kv, "params") != params.name || !p || !(*p == params.field().modulus()))
        throw InvalidParameters("key belongs to parameter set '" + require_key(kv, "params") + "', not '" +
                                params.name + "'");
}

template <std::size_t N>
std::string private_key_to_text(SidhParams<N> const &params, PrivateKey<N> const &key)
{
    return key_header(params) + "side=" + side_name(key.side) + "\nsk=" + key.sk.to_hex() + "\n";
}

template <std::size_t N>
PrivateKey<N> private_key_from_text(SidhParams<N> const &params, std::string const &text)
{
    auto kv = parse_key_values(text);
    check_key_header(params, kv);
    PrivateKey<N> key;
    key.side = parse_side(require_key(kv, "side"));
    auto sk = UInt<N>::from_hex(require_key(kv, "sk"));
    if (!sk)
        throw ParseError("bad private key hex");
    key.sk = *sk;
    check_scalar(params, key);
    return key;
}

template <std::size_t N>
std::string public_key_to_text(SidhParams<N> const &params, Side side, PublicKey<N> const &pk)
{
    return key_header(params) + "side=" + side_name(side) + "\nxP=" + pk.xP.to_string() + "\nxQ=" +
           pk.xQ.to_string() + "\nxPQ=" + pk.xPQ.to_string() + "\n";
}

template <std::size_t N>
std::pair<Side, PublicKey<N>> public_key_from_text(SidhParams<N> const &params, std::string const &text)
{
    auto kv = parse_key_values(text);
    check_key_header(params, kv);
    auto const &f = params.field();
    return {parse_side(require_key(kv, "side")),
            PublicKey<N>{Fp2<N>::parse(f, require_key(kv, "xP")), Fp2<N>::parse(f, require_key(kv, "xQ")),
                         Fp2<N>::parse(f, require_key(kv, "xPQ"))}};
}

// Calls fn(std::integral_constant<std::size_t, N>{}) with the smallest
// supported limb count that holds 2^e2 * 3^e3 - 1 with two spare bits.
template <class Fn>
decltype(auto) with_limbs(unsigned e2, unsigned e3, Fn &&fn)
{
    double bits = e2 + e3 * 1.5849625007211562 + 2;
    if (bits <= 64)
        return fn(std::integral_constant<std::size_t, 1>{});
    if (bits <= 128)
        return fn(std::integral_constant<std::size_t, 2>{});
    if (bits <= 256)
        return fn(std::integral_constant<std::size_t, 4>{});
    if (bits <= 448)
        return fn(std::integral_constant<std::size_t, 7>{});
    throw InvalidParameters("primes above 446 bits are not supported");
}

} // namespace sidhfault
