#pragma once

#include <memory>
#include <random>

#include <sidhfault/field.hpp>
#include <sidhfault/montgomery.hpp>
#include <sidhfault/protocol.hpp>

#include "toy_oracle.hpp"

namespace testing_support {

using namespace sidhfault;

using Toy1 = Fp2<1>;
using Big7 = Fp2<7>;

inline std::shared_ptr<PrimeField<1> const> toy_field()
{
    static auto f = PrimeField<1>::create(4, 3);
    return f;
}

inline std::shared_ptr<PrimeField<7> const> p434_field()
{
    static auto f = PrimeField<7>::create(216, 137);
    return f;
}

inline reference::Toy toy_oracle() { return reference::Toy{431}; }

inline Toy1 lib(reference::Toy::E e) { return Toy1(*toy_field(), e.re, e.im); }
inline reference::Toy::E toy(Toy1 const &x) { return {x.re().value().low(), x.im().value().low()}; }

// Affine x of a library XPoint, or nullopt for infinity.
inline std::optional<reference::Toy::E> toy_x(XPoint<1> const &P)
{
    if (P.is_infinity())
        return std::nullopt;
    return toy(P.affine_x());
}

// The pinned toy431 set: param_gen with seed 431, as `params gen` writes it.
inline SidhParams<1> const &toy_params()
{
    static SidhParams<1> const p = [] {
        std::mt19937_64 rng(431);
        return param_gen<1>(4, 3, rng, "toy431");
    }();
    return p;
}

inline SidhParams<7> const &p434_params()
{
    static SidhParams<7> const p = [] {
        std::mt19937_64 rng(434);
        return param_gen<7>(216, 137, rng, "p434");
    }();
    return p;
}

} // namespace testing_support
