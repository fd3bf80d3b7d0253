#include "ddval/kernels.hpp"

namespace ddval::kernels {
namespace {

struct Selection {
    const Ops* ops;
    std::string_view name;
};

Selection select() {
#ifdef DDVAL_BUILD_AVX2
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return {&avx2::ops, "avx2"};
    }
#endif
    return {&scalar::ops, "scalar"};
}

const Selection g_selection = select();

}  // namespace

const Ops& active() { return *g_selection.ops; }
std::string_view active_name() { return g_selection.name; }

}  // namespace ddval::kernels
