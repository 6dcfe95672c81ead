#pragma once

#include <filesystem>
#include <optional>

#include "gdk/binary_io.hpp"
#include "gdk/denoiser.hpp"
#include "gdk/optimizer.hpp"

namespace gdk {

// "GDK1" | version | h | w | channels | width | embed_dim |
// f32 theta (declaration order) | u8 has_opt | [u64 step | f32 m | f32 v]
struct Checkpoint {
    DenoiserParams params;
    std::optional<AdamState> opt;
};

inline void save_checkpoint(const std::filesystem::path& path, const DenoiserParams& params,
                            const AdamState* opt = nullptr) {
    ByteWriter wtr;
    wtr.magic("GDK1");
    wtr.u32(1);
    wtr.u32(static_cast<uint32_t>(params.dims.h));
    wtr.u32(static_cast<uint32_t>(params.dims.w));
    wtr.u32(static_cast<uint32_t>(params.dims.channels));
    wtr.u32(static_cast<uint32_t>(params.dims.width));
    wtr.u32(static_cast<uint32_t>(params.dims.embed_dim));
    wtr.f32_plane(params.theta);
    wtr.u8(opt ? 1 : 0);
    if (opt) {
        wtr.u64(opt->step);
        wtr.f32_plane(opt->m);
        wtr.f32_plane(opt->v);
    }
    wtr.save(path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    ByteReader rdr = ByteReader::from_file(path);
    rdr.expect_magic("GDK1");
    uint32_t version = rdr.u32("version");
    if (version != 1) throw ParseError(path.filename().string() + ": unsupported version", rdr.offset());

    DenoiserDims dims;
    dims.h = static_cast<int>(rdr.u32("height"));
    dims.w = static_cast<int>(rdr.u32("width"));
    dims.channels = static_cast<int>(rdr.u32("channels"));
    dims.width = static_cast<int>(rdr.u32("hidden width"));
    dims.embed_dim = static_cast<int>(rdr.u32("embedding dim"));
    if (dims.h < 1 || dims.w < 1 || dims.channels < 1 || dims.channels > 4 || dims.width < 1 ||
        dims.embed_dim < 2 || dims.embed_dim % 2 != 0) {
        throw ParseError(path.filename().string() + ": implausible network dimensions", rdr.offset());
    }

    Checkpoint ckpt;
    ckpt.params = DenoiserParams::zeros(dims);
    ckpt.params.theta = rdr.f32_plane(ckpt.params.theta.size(), "parameter array");
    if (rdr.u8("optimizer flag")) {
        AdamState st = AdamState::zeros(ckpt.params.theta.size());
        st.step = rdr.u64("optimizer step");
        st.m = rdr.f32_plane(st.m.size(), "optimizer first moments");
        st.v = rdr.f32_plane(st.v.size(), "optimizer second moments");
        ckpt.opt = std::move(st);
    }
    rdr.expect_end();
    return ckpt;
}

}  // namespace gdk
