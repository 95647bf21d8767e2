#pragma once

#define GAPCR_VERSION "0.1.0"
