#pragma once

#define NATSEL_VERSION_MAJOR 0
#define NATSEL_VERSION_MINOR 1
#define NATSEL_VERSION_PATCH 0
#define NATSEL_VERSION_STRING "0.1.0"
