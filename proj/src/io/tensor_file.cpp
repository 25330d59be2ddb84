#include "corrfabr/io/tensor_file.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "corrfabr/core/error.hpp"

namespace corrfabr::io {

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'F', 'T', 'N'};
constexpr unsigned char kVersion = 1;

// Little-endian encoding is explicit so the format does not depend on host
// byte order.
void append_u64_le(std::vector<unsigned char>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void append_u32_le(std::vector<unsigned char>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint32_t read_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

void save_tensor(const core::Tensor& t, const std::filesystem::path& path, DType dtype) {
    if (t.ndim() == 0) throw InputError("cannot save a tensor with no shape");
    if (t.ndim() > 255) throw InputError("tensor rank exceeds the format limit of 255");
    if (!t.all_finite()) throw InputError("refusing to save non-finite tensor data");

    const std::size_t elem = dtype == DType::f64 ? 8 : 4;
    std::vector<unsigned char> buf;
    buf.reserve(7 + 8 * t.ndim() + elem * t.numel());

    buf.insert(buf.end(), kMagic.begin(), kMagic.end());
    buf.push_back(kVersion);
    buf.push_back(static_cast<unsigned char>(dtype));
    buf.push_back(static_cast<unsigned char>(t.ndim()));
    for (std::size_t e : t.shape()) append_u64_le(buf, e);

    if (dtype == DType::f64) {
        for (double v : t.vec()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            append_u64_le(buf, bits);
        }
    } else {
        for (double v : t.vec()) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            append_u32_le(buf, bits);
        }
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    os.flush();
    if (!os) throw IoError("write failed: " + path.string());
}

core::Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    const auto file_size = static_cast<std::size_t>(is.tellg());
    is.seekg(0);

    std::vector<unsigned char> buf(file_size);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(file_size));
    if (!is) throw IoError("read failed: " + path.string());

    if (file_size < 7 || std::memcmp(buf.data(), kMagic.data(), 4) != 0) {
        throw InputError("bad magic in " + path.string());
    }
    if (buf[4] != kVersion) {
        throw InputError("unsupported version " + std::to_string(buf[4]) + " in " + path.string());
    }
    const unsigned char dtype_byte = buf[5];
    if (dtype_byte != static_cast<unsigned char>(DType::f32) &&
        dtype_byte != static_cast<unsigned char>(DType::f64)) {
        throw InputError("unsupported dtype " + std::to_string(dtype_byte) + " in " + path.string());
    }
    const std::size_t ndim = buf[6];
    if (ndim == 0) throw InputError("zero-rank tensor in " + path.string());
    if (file_size < 7 + 8 * ndim) throw InputError("truncated header in " + path.string());

    std::vector<std::size_t> shape(ndim);
    for (std::size_t i = 0; i < ndim; ++i) {
        shape[i] = static_cast<std::size_t>(read_u64_le(buf.data() + 7 + 8 * i));
        if (shape[i] == 0) throw InputError("zero extent in " + path.string());
    }

    const std::size_t n = core::shape_product(shape);
    const std::size_t elem = dtype_byte == static_cast<unsigned char>(DType::f64) ? 8 : 4;
    const std::size_t payload_off = 7 + 8 * ndim;
    if (file_size != payload_off + elem * n) {
        throw InputError("truncated payload in " + path.string());
    }

    std::vector<double> data(n);
    const unsigned char* p = buf.data() + payload_off;
    if (elem == 8) {
        for (std::size_t i = 0; i < n; ++i, p += 8) {
            const std::uint64_t bits = read_u64_le(p);
            double v;
            std::memcpy(&v, &bits, 8);
            data[i] = v;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i, p += 4) {
            const std::uint32_t bits = read_u32_le(p);
            float v;
            std::memcpy(&v, &bits, 4);
            data[i] = static_cast<double>(v);
        }
    }
    core::Tensor t(std::move(shape), std::move(data));
    if (!t.all_finite()) throw InputError("non-finite payload in " + path.string());
    return t;
}

}  // namespace corrfabr::io
