// Browser entry point. Served same-origin with the API (see dev-server).

import { PrevizApi } from "./api.js";
import { createApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  createApp(root, new PrevizApi(""), window.location);
}
