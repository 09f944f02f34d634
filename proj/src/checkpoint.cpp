#include "stssdl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stssdl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; byte swapping is not implemented");

void save_tensors(const std::string& dir,
                  const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::ofstream manifest(dir + "/model.manifest");
    std::ofstream blob(dir + "/model.bin", std::ios::binary);
    if (!manifest || !blob) throw ParseError("cannot write checkpoint in " + dir);

    std::size_t offset = 0;
    for (const auto& [name, t] : tensors) {
        manifest << name << ' ' << t.rank();
        for (std::size_t e : t.shape) manifest << ' ' << e;
        manifest << ' ' << offset << '\n';
        blob.write(reinterpret_cast<const char*>(t.data.data()),
                   static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        offset += t.data.size() * sizeof(double);
    }
    if (!manifest || !blob) throw ParseError("checkpoint write failed in " + dir);
}

std::map<std::string, Tensor> load_tensors(const std::string& dir) {
    std::ifstream manifest(dir + "/model.manifest");
    if (!manifest) throw ParseError("cannot open checkpoint manifest in " + dir);
    std::ifstream blob(dir + "/model.bin", std::ios::binary);
    if (!blob) throw ParseError("cannot open checkpoint blob in " + dir);

    std::map<std::string, Tensor> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string name;
        std::size_t rank = 0, offset = 0;
        if (!(is >> name >> rank)) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": malformed entry");
        }
        Shape shape(rank);
        for (std::size_t i = 0; i < rank; ++i) {
            if (!(is >> shape[i])) {
                throw ParseError("manifest line " + std::to_string(line_no) + ": missing extent");
            }
        }
        if (!(is >> offset)) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": missing offset");
        }
        Tensor t(shape);
        blob.seekg(static_cast<std::streamoff>(offset));
        blob.read(reinterpret_cast<char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!blob) {
            throw ParseError("checkpoint blob truncated for tensor '" + name + "'");
        }
        out.emplace(name, std::move(t));
    }
    return out;
}

}  // namespace stssdl
