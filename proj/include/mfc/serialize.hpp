#ifndef MFC_SERIALIZE_HPP
#define MFC_SERIALIZE_HPP

#include "mfc/features.hpp"
#include "mfc/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace mfc {

using Json = nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes);

// 16 hex digits of FNV-1a over the compact dump. Objects dump with sorted
// keys, so the hash does not depend on key order in the source file.
std::string hash_json(const Json& j);

Json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const Json& j);

Json to_json(const FeatureBasis& basis);
FeatureBasis basis_from_json(const Json& j);

}  // namespace mfc

#endif  // MFC_SERIALIZE_HPP
