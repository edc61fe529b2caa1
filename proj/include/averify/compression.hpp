#pragma once

#include <array>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "averify/common.hpp"

namespace averify {

using Bytes = std::vector<std::uint8_t>;

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

namespace rc {

/// 32-bit range coder with carry propagation (LZMA-style byte output).
/// Totals passed to encode must stay below 2^16.
class Encoder {
public:
    explicit Encoder(Bytes& out) : out_(out) {}

    void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
        const std::uint32_t r = range_ / total;
        low_ += std::uint64_t(r) * cum;
        range_ = r * freq;
        while (range_ < kTop) {
            range_ <<= 8;
            shift_low();
        }
    }

    void finish() {
        for (int i = 0; i < 5; ++i) shift_low();
    }

private:
    static constexpr std::uint32_t kTop = 1u << 24;

    void shift_low() {
        if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
            const auto carry = static_cast<std::uint8_t>(low_ >> 32);
            std::uint8_t temp = cache_;
            do {
                out_.push_back(static_cast<std::uint8_t>(temp + carry));
                temp = 0xFF;
            } while (--cache_size_ != 0);
            cache_ = static_cast<std::uint8_t>(low_ >> 24);
        }
        ++cache_size_;
        low_ = (low_ & 0x00FFFFFFu) << 8;
    }

    Bytes& out_;
    std::uint64_t low_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFu;
    std::uint8_t cache_ = 0;
    std::uint64_t cache_size_ = 1;
};

class Decoder {
public:
    explicit Decoder(std::span<const std::uint8_t> in) : in_(in) {
        for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next();
    }

    std::uint32_t get_freq(std::uint32_t total) {
        step_ = range_ / total;
        const std::uint32_t v = code_ / step_;
        return v < total ? v : total - 1;
    }

    /// Must follow get_freq with the same total.
    void decode(std::uint32_t cum, std::uint32_t freq) {
        code_ -= step_ * cum;
        range_ = step_ * freq;
        while (range_ < kTop) {
            code_ = (code_ << 8) | next();
            range_ <<= 8;
        }
    }

private:
    static constexpr std::uint32_t kTop = 1u << 24;

    std::uint32_t next() { return pos_ < in_.size() ? in_[pos_++] : 0u; }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    std::uint32_t code_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFu;
    std::uint32_t step_ = 1;
};

}  // namespace rc

namespace ppm {

/// Adaptive order-k PPM model: method-C escapes (escape count = number of
/// distinct non-excluded symbols in the context), symbol exclusion on escape,
/// full update of all orders, and a uniform order(-1) fallback over bytes.
struct Model {
    explicit Model(std::size_t order) : order_(order), tables_(order + 1) {}

    struct Context {
        std::vector<std::pair<std::uint8_t, std::uint16_t>> symbols;
        std::uint32_t total = 0;
    };

    static constexpr std::uint32_t kRescaleAt = 60000;

    void select_contexts() {
        const std::size_t top = std::min<std::size_t>(order_, seen_);
        active_.clear();
        for (std::size_t o = 0; o <= top; ++o) {
            const std::uint64_t mask = o == 8 ? ~std::uint64_t{0} : ((std::uint64_t{1} << (8 * o)) - 1);
            active_.push_back(&tables_[o][history_ & mask]);
        }
    }

    void update(std::uint8_t s) {
        for (Context* c : active_) {
            bool found = false;
            for (auto& [sym, cnt] : c->symbols) {
                if (sym == s) {
                    ++cnt;
                    found = true;
                    break;
                }
            }
            if (!found) c->symbols.emplace_back(s, 1);
            if (++c->total > kRescaleAt) {
                c->total = 0;
                for (auto& [sym, cnt] : c->symbols) {
                    cnt = static_cast<std::uint16_t>((cnt + 1) / 2);
                    c->total += cnt;
                }
            }
        }
        history_ = (history_ << 8) | s;
        ++seen_;
    }

    std::size_t order_;
    std::vector<std::unordered_map<std::uint64_t, Context>> tables_;
    std::vector<Context*> active_;
    std::uint64_t history_ = 0;
    std::size_t seen_ = 0;
};

struct EncodeSide {
    rc::Encoder& enc;
    int symbol;
};

struct DecodeSide {
    rc::Decoder& dec;
};

inline void write_varint(Bytes& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(v | 0x80));
        v >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint64_t read_varint(std::span<const std::uint8_t> in, std::size_t& pos) {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
        if (pos >= in.size()) throw ValidationError("truncated PPM header");
        std::uint8_t b = in[pos++];
        v |= std::uint64_t(b & 0x7F) << shift;
        if (!(b & 0x80)) return v;
    }
    throw ValidationError("malformed PPM header");
}

inline constexpr std::uint8_t kMagic = 0xB7;

/// Codes one symbol in either direction; encoder and decoder share this walk
/// so both make identical model decisions. On encode `symbol` is the byte to
/// write, on decode the return value is the byte read.
template <class Side>
int code_one(Model& m, Side& side, int symbol) {
    m.select_contexts();
    std::bitset<256> excluded;
    for (auto it = m.active_.rbegin(); it != m.active_.rend(); ++it) {
        const Model::Context& c = **it;
        std::uint32_t tot = 0, distinct = 0;
        for (const auto& [sym, cnt] : c.symbols) {
            if (excluded[sym]) continue;
            tot += cnt;
            ++distinct;
        }
        if (distinct == 0) continue;
        const std::uint32_t total = tot + distinct;
        if constexpr (std::is_same_v<Side, EncodeSide>) {
            std::uint32_t cum = 0;
            for (const auto& [sym, cnt] : c.symbols) {
                if (excluded[sym]) continue;
                if (sym == symbol) {
                    side.enc.encode(cum, cnt, total);
                    m.update(static_cast<std::uint8_t>(symbol));
                    return symbol;
                }
                cum += cnt;
            }
            side.enc.encode(tot, distinct, total);
        } else {
            const std::uint32_t f = side.dec.get_freq(total);
            if (f < tot) {
                std::uint32_t cum = 0;
                for (const auto& [sym, cnt] : c.symbols) {
                    if (excluded[sym]) continue;
                    if (f < cum + cnt) {
                        side.dec.decode(cum, cnt);
                        m.update(sym);
                        return sym;
                    }
                    cum += cnt;
                }
            }
            side.dec.decode(tot, distinct);
        }
        for (const auto& [sym, cnt] : c.symbols) excluded[sym] = true;
    }

    // order -1: uniform over the bytes not excluded above
    const auto remaining = static_cast<std::uint32_t>(256 - excluded.count());
    if constexpr (std::is_same_v<Side, EncodeSide>) {
        std::uint32_t rank = 0;
        for (int s = 0; s < symbol; ++s)
            if (!excluded[static_cast<std::size_t>(s)]) ++rank;
        side.enc.encode(rank, 1, remaining);
    } else {
        const std::uint32_t rank = side.dec.get_freq(remaining);
        side.dec.decode(rank, 1);
        std::uint32_t seen = 0;
        for (int s = 0; s < 256; ++s) {
            if (excluded[static_cast<std::size_t>(s)]) continue;
            if (seen++ == rank) {
                symbol = s;
                break;
            }
        }
    }
    m.update(static_cast<std::uint8_t>(symbol));
    return symbol;
}

/// Header: magic byte, order byte, varint length; then the range-coded body
/// (absent for empty input).
inline Bytes encode(std::span<const std::uint8_t> input, std::size_t order) {
    if (order < 1 || order > 8) throw ValidationError("PPM order must lie in 1..8, got " + std::to_string(order));
    Bytes out{kMagic, static_cast<std::uint8_t>(order)};
    write_varint(out, input.size());
    if (input.empty()) return out;
    Model m(order);
    rc::Encoder enc(out);
    EncodeSide side{enc, 0};
    for (std::uint8_t b : input) code_one(m, side, b);
    enc.finish();
    return out;
}

inline Bytes decode(std::span<const std::uint8_t> packed) {
    if (packed.size() < 3 || packed[0] != kMagic) throw ValidationError("not a PPM stream");
    const std::size_t order = packed[1];
    if (order < 1 || order > 8) throw ValidationError("PPM stream declares invalid order");
    std::size_t pos = 2;
    const std::uint64_t length = read_varint(packed, pos);
    Bytes out;
    if (length == 0) return out;
    out.reserve(length);
    Model m(order);
    rc::Decoder dec(packed.subspan(pos));
    DecodeSide side{dec};
    for (std::uint64_t i = 0; i < length; ++i) out.push_back(static_cast<std::uint8_t>(code_one(m, side, 0)));
    return out;
}

}  // namespace ppm

// ---------------------------------------------------------------------------
// compressors

class Compressor {
public:
    virtual ~Compressor() = default;
    virtual Bytes encode(std::span<const std::uint8_t> input) const = 0;
    virtual Bytes decode(std::span<const std::uint8_t> packed) const = 0;
    virtual std::string name() const = 0;

    virtual std::size_t compressed_size(std::span<const std::uint8_t> input) const { return encode(input).size(); }
    std::size_t compressed_size(std::string_view s) const { return compressed_size(as_bytes(s)); }
};

class PpmCompressor final : public Compressor {
public:
    explicit PpmCompressor(std::size_t order = 5) : order_(order) {
        if (order < 1 || order > 8) throw ValidationError("PPM order must lie in 1..8, got " + std::to_string(order));
    }
    Bytes encode(std::span<const std::uint8_t> input) const override { return ppm::encode(input, order_); }
    Bytes decode(std::span<const std::uint8_t> packed) const override { return ppm::decode(packed); }
    std::string name() const override { return "ppm-o" + std::to_string(order_); }
    std::size_t order() const noexcept { return order_; }

private:
    std::size_t order_;
};

/// Identity "compressor" whose size is the input length. For fast plumbing tests.
class CountingCompressor final : public Compressor {
public:
    Bytes encode(std::span<const std::uint8_t> input) const override { return Bytes(input.begin(), input.end()); }
    Bytes decode(std::span<const std::uint8_t> packed) const override { return Bytes(packed.begin(), packed.end()); }
    std::string name() const override { return "counting"; }
    using Compressor::compressed_size;
    std::size_t compressed_size(std::span<const std::uint8_t> input) const override { return input.size(); }
};

// ---------------------------------------------------------------------------
// compression-based dissimilarities

/// Compression based cosine from sizes: 1 - (C(x) + C(y) - C(xy)) / sqrt(C(x) C(y)).
inline double cbc_from_sizes(double cx, double cy, double cxy) {
    return 1.0 - (cx + cy - cxy) / std::sqrt(cx * cy);
}

/// Normalized compression distance from sizes for one concatenation order.
inline double ncd_from_sizes(double cx, double cy, double cxy) {
    return (cxy - std::min(cx, cy)) / std::max(cx, cy);
}

namespace detail {
inline void require_non_empty(std::string_view x, std::string_view y, const char* what) {
    if (x.empty() || y.empty()) throw ValidationError(std::string(what) + " requires non-empty inputs");
}
}  // namespace detail

/// Lower means more similar. Concatenation is x followed by y.
inline double cbc(std::string_view x, std::string_view y, const Compressor& c) {
    detail::require_non_empty(x, y, "cbc");
    std::string xy;
    xy.reserve(x.size() + y.size());
    xy.append(x).append(y);
    return cbc_from_sizes(double(c.compressed_size(x)), double(c.compressed_size(y)), double(c.compressed_size(xy)));
}

/// NCD symmetrised by taking the smaller value over both concatenation orders.
inline double ncd(std::string_view x, std::string_view y, const Compressor& c) {
    detail::require_non_empty(x, y, "ncd");
    const double cx = double(c.compressed_size(x)), cy = double(c.compressed_size(y));
    std::string xy, yx;
    xy.append(x).append(y);
    yx.append(y).append(x);
    return std::min(ncd_from_sizes(cx, cy, double(c.compressed_size(xy))),
                    ncd_from_sizes(cx, cy, double(c.compressed_size(yx))));
}

enum class CompressionMeasureKind { cbc, ncd };

struct CompressionMeasure {
    CompressionMeasureKind kind = CompressionMeasureKind::cbc;
    std::shared_ptr<const Compressor> compressor = std::make_shared<PpmCompressor>();

    double operator()(std::string_view x, std::string_view y) const {
        return kind == CompressionMeasureKind::cbc ? cbc(x, y, *compressor) : ncd(x, y, *compressor);
    }
};

}  // namespace averify
