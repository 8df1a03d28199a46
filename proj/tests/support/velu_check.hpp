#pragma once

// Fixture comparing x-only isogenies with the textbook Velu oracle at p = 431.

#include <gtest/gtest.h>

#include <optional>

#include "common.hpp"

namespace testing_support {

struct ToyIsogeny : ::testing::Test {
    reference::Toy O = toy_oracle();
    reference::SqrtTable table{O};
    PrimeField<1> const &f = *toy_field();

    XPoint<1> xp(reference::Pt const &P) const
    {
        return P.inf ? XPoint<1>::infinity(f) : XPoint<1>::from_affine(lib(P.x));
    }

    // Checks an x-only isogeny against Velu on every point of the domain:
    // same j, and x-maps agreeing up to the isomorphism u = c (x + A'/3).
    template <class Eval>
    void compare_with_velu(reference::Mont const &E, reference::Pt const &K, ProjCoeff<1> const &codomain, Eval eval)
    {
        auto pts = E.all_points(table);
        auto V = reference::velu(E, K, pts);
        Toy1 A2 = affine_a_from_projective(codomain);
        ASSERT_EQ(toy(j_invariant(A2)), V.j);

        auto Ao = toy(A2);
        auto third = O.inv(O.small(3));
        auto shift = O.mul(Ao, third);
        std::optional<reference::Toy::E> scale;
        std::size_t kernel_hits = 0;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            XPoint<1> img = eval(xp(pts[k]));
            ASSERT_FALSE(img.is_degenerate());
            if (V.image_inf[k]) {
                ASSERT_TRUE(img.is_infinity());
                ++kernel_hits;
                continue;
            }
            ASSERT_FALSE(img.is_infinity());
            auto u = O.add(toy(img.affine_x()), shift);
            if (!scale) {
                if (u == O.zero())
                    continue;
                scale = O.div(V.image_u[k], u);
            }
            ASSERT_EQ(V.image_u[k], O.mul(*scale, u));
        }
        ASSERT_TRUE(scale.has_value());
        ASSERT_GT(kernel_hits, 0u);
        // a' = c^2 (1 - A'^2/3), b' = c^3 (2A'^3/27 - A'/3)
        auto a_ours = O.sub(O.one(), O.mul(O.mul(Ao, Ao), third));
        auto b_ours = O.sub(O.mul(O.mul(O.small(2), O.mul(Ao, O.mul(Ao, Ao))), O.inv(O.small(27))), shift);
        auto c2 = O.mul(*scale, *scale);
        EXPECT_EQ(V.a, O.mul(c2, a_ours));
        EXPECT_EQ(V.b, O.mul(O.mul(c2, *scale), b_ours));
    }
};


} // namespace testing_support
