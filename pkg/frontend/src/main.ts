import { ServiceClient } from "./api.js";
import { PickerStore } from "./state.js";
import { mountPicker } from "./ui.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app root element");

// Same-origin by default (the crop service serves this page); override with
// ?service=http://host:port for a service running elsewhere.
const serviceUrl = new URLSearchParams(location.search).get("service") ?? "";
mountPicker(root, new PickerStore(new ServiceClient(serviceUrl)));
