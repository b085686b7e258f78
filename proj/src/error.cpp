#include "hjinr/error.hpp"
