#include "ctvos/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>

namespace fs = std::filesystem;

namespace ctvos {

namespace {

constexpr char kMagic[4] = {'C', 'T', 'V', 'S'};
constexpr uint32_t kVersion = 1;

struct Record {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v & 0xff));
    out.push_back(uint8_t((v >> 8) & 0xff));
    out.push_back(uint8_t((v >> 16) & 0xff));
    out.push_back(uint8_t((v >> 24) & 0xff));
}

uint32_t get_u32(const std::vector<uint8_t>& buf, size_t& at) {
    check(at + 4 <= buf.size(), "checkpoint truncated");
    uint32_t v = uint32_t(buf[at]) | uint32_t(buf[at + 1]) << 8 | uint32_t(buf[at + 2]) << 16 |
                 uint32_t(buf[at + 3]) << 24;
    at += 4;
    return v;
}

std::vector<uint8_t> serialize(const std::vector<Record>& records) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, uint32_t(records.size()));
    for (const auto& r : records) {
        put_u32(out, uint32_t(r.name.size()));
        out.insert(out.end(), r.name.begin(), r.name.end());
        put_u32(out, uint32_t(r.shape.size()));
        for (int d : r.shape) put_u32(out, uint32_t(d));
        size_t at = out.size();
        out.resize(at + r.data.size() * 4);
        for (float f : r.data) {
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            out[at++] = uint8_t(bits & 0xff);
            out[at++] = uint8_t((bits >> 8) & 0xff);
            out[at++] = uint8_t((bits >> 16) & 0xff);
            out[at++] = uint8_t((bits >> 24) & 0xff);
        }
    }
    return out;
}

std::vector<Record> deserialize(const std::vector<uint8_t>& buf, const std::string& path) {
    size_t at = 0;
    check(buf.size() >= 4 && std::memcmp(buf.data(), kMagic, 4) == 0, path,
          " is not a checkpoint (bad magic)");
    at = 4;
    uint32_t version = get_u32(buf, at);
    check(version == kVersion, path, ": unsupported checkpoint version ", version);
    uint32_t count = get_u32(buf, at);
    std::vector<Record> records;
    for (uint32_t i = 0; i < count; ++i) {
        Record r;
        uint32_t name_len = get_u32(buf, at);
        check(at + name_len <= buf.size(), "checkpoint truncated");
        r.name.assign(buf.begin() + at, buf.begin() + at + name_len);
        at += name_len;
        uint32_t rank = get_u32(buf, at);
        int64_t n = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            uint32_t e = get_u32(buf, at);
            check(e > 0 && e < (1u << 28), "checkpoint: implausible extent ", e);
            r.shape.push_back(int(e));
            n *= e;
        }
        check(at + size_t(n) * 4 <= buf.size(), "checkpoint truncated");
        r.data.resize(size_t(n));
        for (int64_t j = 0; j < n; ++j) {
            uint32_t bits = uint32_t(buf[at]) | uint32_t(buf[at + 1]) << 8 |
                            uint32_t(buf[at + 2]) << 16 | uint32_t(buf[at + 3]) << 24;
            at += 4;
            std::memcpy(&r.data[j], &bits, 4);
        }
        records.push_back(std::move(r));
    }
    check(at == buf.size(), path, ": trailing bytes after last record");
    return records;
}

std::vector<float> encode_arch(const ModelDims& d) {
    std::vector<float> out;
    out.push_back(float(d.in_channels));
    for (int c : d.enc_channels) out.push_back(float(c));
    for (int s : d.enc_strides) out.push_back(float(s));
    out.push_back(float(d.dec_channels.size()));
    for (int c : d.dec_channels) out.push_back(float(c));
    return out;
}

ModelDims decode_arch(const std::vector<float>& v) {
    check(v.size() >= 10, "checkpoint: malformed architecture record");
    ModelDims d;
    size_t at = 0;
    d.in_channels = int(v[at++]);
    for (int i = 0; i < 4; ++i) d.enc_channels[i] = int(v[at++]);
    for (int i = 0; i < 4; ++i) d.enc_strides[i] = int(v[at++]);
    int n = int(v[at++]);
    check(v.size() == at + size_t(n), "checkpoint: malformed architecture record");
    d.dec_channels.clear();
    for (int i = 0; i < n; ++i) {
        d.dec_channels.push_back(int(v[at + size_t(i)]));
        check(d.dec_channels.back() > 0, "checkpoint: bad decoder width");
    }
    d.validate();
    return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const AdamState<float>* opt) {
    std::vector<Record> records;
    auto arch = encode_arch(params.dims);
    records.push_back({"meta.arch", {int(arch.size())}, std::move(arch)});
    auto named = params.named_params();
    for (auto& [name, t] : named) records.push_back({name, t->shape, t->value});
    if (opt) {
        check(opt->m.size() == named.size(), "checkpoint: optimizer state size mismatch");
        records.push_back({"opt.step", {1}, {float(opt->step)}});
        for (size_t i = 0; i < named.size(); ++i) {
            records.push_back({"opt.m." + named[i].first, named[i].second->shape, opt->m[i]});
            records.push_back({"opt.v." + named[i].first, named[i].second->shape, opt->v[i]});
        }
    }
    auto bytes = serialize(records);

    std::string tmp = path + ".tmp";
    FILE* f = std::fopen(tmp.c_str(), "wb");
    check(f != nullptr, "cannot open ", tmp, " for writing");
    size_t written = std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    check(written == bytes.size(), "short write to ", tmp);
    fs::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    check(f != nullptr, "cannot open checkpoint ", path);
    std::fseek(f, 0, SEEK_END);
    long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> buf(static_cast<size_t>(size), 0);
    size_t got = std::fread(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    check(got == buf.size(), "short read from ", path);

    auto records = deserialize(buf, path);
    std::map<std::string, Record*> by_name;
    for (auto& r : records) by_name[r.name] = &r;

    auto* arch = by_name.count("meta.arch") ? by_name["meta.arch"] : nullptr;
    check(arch != nullptr, path, ": missing architecture record");

    LoadedCheckpoint out{ModelParams<float>::init(decode_arch(arch->data), 0), std::nullopt};
    auto named = out.params.named_params();
    for (auto& [name, t] : named) {
        auto it = by_name.find(name);
        check(it != by_name.end(), path, ": missing parameter ", name);
        check(it->second->shape == t->shape, path, ": parameter ", name, " has shape ",
              shape_str(it->second->shape), ", expected ", shape_str(t->shape));
        t->value = it->second->data;
    }

    if (by_name.count("opt.step")) {
        AdamState<float> st;
        st.step = int64_t(by_name["opt.step"]->data.at(0));
        for (auto& [name, t] : named) {
            auto mit = by_name.find("opt.m." + name);
            auto vit = by_name.find("opt.v." + name);
            check(mit != by_name.end() && vit != by_name.end(), path,
                  ": incomplete optimizer state for ", name);
            st.m.push_back(mit->second->data);
            st.v.push_back(vit->second->data);
        }
        out.opt = std::move(st);
    }
    return out;
}

}  // namespace ctvos
