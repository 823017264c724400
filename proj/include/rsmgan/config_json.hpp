#ifndef RSMGAN_CONFIG_JSON_HPP
#define RSMGAN_CONFIG_JSON_HPP

#include "rsmgan/model.hpp"

#include <json.hpp>

namespace rsmgan {

nlohmann::json network_config_to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const nlohmann::json& j);

} // namespace rsmgan

#endif
