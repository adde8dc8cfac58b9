#pragma once

#include <string>

namespace valign {

// Splits "http(s)://host[:port]/path" into client base and path.
struct EndpointParts {
  std::string base;  // scheme://host[:port]
  std::string path;  // leading '/'
};
EndpointParts split_endpoint(const std::string& endpoint);

}  // namespace valign
