#pragma once

// forward declaration of nlohmann::json matching vendor/json.hpp
#include <nlohmann/json_fwd.hpp>
