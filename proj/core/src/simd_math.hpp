#pragma once

// Exposes glibc's libmvec simd clones of sin/cos/exp to the vectorizer
// without turning on fast-math semantics anywhere. Must be included before
// <cmath> in the kernel translation units.

#if defined(__x86_64__) && defined(__GLIBC__) && !defined(__FAST_MATH__)
#define __FAST_MATH__ 1
#include <math.h>
#undef __FAST_MATH__
#endif

#include <cmath>
